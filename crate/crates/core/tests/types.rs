mod support;

use intent_forge::function_table::{parse_type, render_signature, FunctionSpec, SemanticType};
use intent_forge::host::{standard_specs, STANDARD_CATALOG};
use rand::rngs::StdRng;
use rand::SeedableRng;

use support::types_gen::random_type;

#[test]
fn catalog_signatures_round_trip() {
    assert_eq!(STANDARD_CATALOG.len(), 16);
    for line in STANDARD_CATALOG {
        let spec = FunctionSpec::parse_signature(line).unwrap();
        assert_eq!(render_signature(&spec), *line);
        assert_eq!(FunctionSpec::parse_signature(&render_signature(&spec)).unwrap(), spec);
        for p in &spec.params {
            assert_eq!(parse_type(&p.ty.to_string()).unwrap(), p.ty);
        }
        assert_eq!(parse_type(&spec.return_type.to_string()).unwrap(), spec.return_type);
    }
    assert_eq!(standard_specs().len(), 16);
}

#[test]
fn random_types_round_trip() {
    let mut rng = StdRng::seed_from_u64(8);
    for _ in 0..600 {
        let ty = random_type(&mut rng, 4);
        let text = ty.to_string();
        let back = parse_type(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
        assert_eq!(back, ty, "{text}");
        assert_eq!(back.to_string(), text);
    }
}

#[test]
fn whitespace_is_not_significant() {
    let ty = parse_type(" Dictionary< String ,Collection<Integer | null> > ").unwrap();
    assert_eq!(ty.to_string(), "Dictionary<String, Collection<Integer|null>>");
    assert_eq!(
        ty,
        SemanticType::dictionary(
            SemanticType::String,
            SemanticType::collection(SemanticType::union([SemanticType::Integer, SemanticType::Null]))
        )
    );
}

#[test]
fn malformed_types_are_rejected() {
    for bad in [
        "",
        "Collection<",
        "Dictionary<String>",
        "Integer|",
        "list",
        "Collection<Integer>>",
        "|null",
        "Dictionary<String, Integer, Float>",
    ] {
        assert!(parse_type(bad).is_err(), "{bad:?}");
    }
}
