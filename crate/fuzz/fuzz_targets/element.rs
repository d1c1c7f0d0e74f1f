#![no_main]

use libfuzzer_sys::fuzz_target;
use walkbound::group::{
    compose_and_reduce, invert, parse_element, word_length, GroupSpec, Order, ProductConvention,
};

fn specs() -> Vec<GroupSpec> {
    vec![
        GroupSpec::free(2),
        GroupSpec::modular(),
        GroupSpec::free_abelian(2),
        GroupSpec::cyclic(Order::Finite(6), "z"),
        GroupSpec::DirectProduct {
            components: vec![GroupSpec::cyclic(Order::Finite(3), "z"), GroupSpec::free(2)],
            convention: ProductConvention::Synchronized,
        },
    ]
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for spec in specs() {
        let Ok(x) = parse_element(&spec, text) else { continue };
        let inv = invert(&spec, &x).expect("parsed elements invert");
        let lx = word_length(&spec, &x).expect("parsed elements have a length");
        let li = word_length(&spec, &inv).expect("inverses have a length");
        assert!((lx - li).abs() <= 1e-9 * (1.0 + lx.abs()), "length changed under inversion");
        let prod = compose_and_reduce(&spec, &x, &inv).expect("x * x^-1 reduces");
        assert_eq!(prod, spec.identity(), "x * x^-1 is not the identity");
    }
});
