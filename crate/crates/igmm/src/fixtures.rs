//! Reference machines shared by the unit tests, loaded from the fixture
//! files also used by the integration tests.

use crate::format::parse_auto;
use crate::machine::Igmm;

/// 3-state controller over inputs {a, b}, outputs {x, y}; minimizes to one
/// state.
pub fn fig1() -> Igmm {
    parse_auto(include_str!("../fixtures/fig1.kiss")).unwrap()
}

/// 7-state machine over input {a}, outputs {x, y, z}; minimizes to three
/// states, output-assignment reduction gives four.
pub fn fig2() -> Igmm {
    parse_auto(include_str!("../fixtures/fig2.xkiss")).unwrap()
}

/// Three pairwise-compatible states with no common output on input a;
/// exercises the nonemptiness refinement.  Minimizes to two states.
pub fn gadget() -> Igmm {
    parse_auto(include_str!("../fixtures/gadget.xkiss")).unwrap()
}
