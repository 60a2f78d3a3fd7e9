//! Random semantic types, normalized through the union constructor.
//! `void` only ever appears as a whole type.

use intent_forge::function_table::SemanticType;
use rand::Rng;

pub fn random_type<R: Rng>(rng: &mut R, depth: u32) -> SemanticType {
    if rng.gen_bool(0.05) {
        SemanticType::Void
    } else {
        inner(rng, depth)
    }
}

fn inner<R: Rng>(rng: &mut R, depth: u32) -> SemanticType {
    let leaf = depth == 0 || rng.gen_bool(0.35);
    if leaf {
        return match rng.gen_range(0..5) {
            0 => SemanticType::String,
            1 => SemanticType::Integer,
            2 => SemanticType::Float,
            3 => SemanticType::Boolean,
            _ => SemanticType::Null,
        };
    }
    match rng.gen_range(0..3) {
        0 => SemanticType::collection(inner(rng, depth - 1)),
        1 => SemanticType::dictionary(inner(rng, depth - 1), inner(rng, depth - 1)),
        _ => {
            let n = rng.gen_range(2..=4);
            SemanticType::union((0..n).map(|_| inner(rng, depth - 1)))
        }
    }
}
