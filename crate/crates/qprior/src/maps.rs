//! The shipped 24x21 navigation maps, embedded so examples and tests never
//! depend on the working directory. The same files live in `maps/` for use
//! with the CLI's `--map` flag.
//!
//! Every map places a small chamber at the canvas centre. Consensus scores
//! scale with the reciprocal of the row-maximum Q-value, so free cells must
//! stay close to every source goal or distant, low-value rows drown the
//! collision signal; a compact chamber with one goal per corner keeps every
//! cell within that radius.

use crate::error::Result;
use crate::grid::{parse_map, MapSpec};

pub const ORIGINAL: &str = include_str!("../maps/original.map");
pub const VARIANT_A: &str = include_str!("../maps/variant_a.map");
pub const VARIANT_B: &str = include_str!("../maps/variant_b.map");
pub const VARIANT_C: &str = include_str!("../maps/variant_c.map");
pub const VARIANT_D: &str = include_str!("../maps/variant_d.map");
pub const COMMON_REWARD: &str = include_str!("../maps/common_reward.map");

/// Default goal cells of the four solved tasks the prior is distilled from,
/// one per chamber corner.
pub const SOURCE_GOALS: [(usize, usize); 4] = [(10, 9), (13, 9), (10, 11), (13, 11)];

/// Built-in map names accepted wherever a map path is expected.
pub const BUILTIN_NAMES: [&str; 6] = [
    "original",
    "variant_a",
    "variant_b",
    "variant_c",
    "variant_d",
    "common_reward",
];

pub fn builtin(name: &str) -> Option<&'static str> {
    match name {
        "original" => Some(ORIGINAL),
        "variant_a" => Some(VARIANT_A),
        "variant_b" => Some(VARIANT_B),
        "variant_c" => Some(VARIANT_C),
        "variant_d" => Some(VARIANT_D),
        "common_reward" => Some(COMMON_REWARD),
        _ => None,
    }
}

pub fn original() -> MapSpec {
    parse_map(ORIGINAL).expect("shipped map is valid")
}

pub fn common_reward() -> MapSpec {
    parse_map(COMMON_REWARD).expect("shipped map is valid")
}

pub fn variant(name: &str) -> Result<MapSpec> {
    match builtin(name) {
        Some(text) => parse_map(text),
        None => Err(crate::error::Error::config(format!(
            "unknown built-in map {name:?}; expected one of {BUILTIN_NAMES:?}"
        ))),
    }
}
