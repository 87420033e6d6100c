use desing::invariant::{InvValue, Terminal, Variant};
use desing::polyring::{parse_poly, rat, ExtNat};
use desing::tower::{Mode, Tower, TowerError};
use proptest::prelude::*;

fn inv_value() -> impl Strategy<Value = InvValue> {
    (1u64..=9, prop::collection::vec((1i64..=30, 1i64..=7, 0usize..=3), 0..=3), 0u8..3, 1i64..=20, 1i64..=5).prop_map(
        |(iota, pairs, term, mn, md)| {
            let mut s = vec![pairs.len() % 3];
            let mut nu = Vec::new();
            for (a, b, k) in &pairs {
                nu.push(rat(*a, *b));
                s.push(*k);
            }
            let terminal = match term {
                0 => Terminal::Zero,
                _ => Terminal::Infinity,
            };
            let mu_final = (terminal == Terminal::Zero).then(|| rat(mn, md));
            InvValue { iota: ExtNat::Fin(iota), s, nu, terminal, mu_final }
        },
    )
}

proptest! {
    #[test]
    fn display_parse_round_trip(v in inv_value()) {
        let back: InvValue = v.to_string().parse().unwrap();
        prop_assert_eq!(&back, &v);
        prop_assert_eq!(back.mu_final, v.mu_final);
    }

    #[test]
    fn order_follows_flattened_sequence(a in inv_value(), b in inv_value()) {
        prop_assert_eq!(a.cmp(&b), a.flatten().cmp(&b.flatten()));
    }
}

#[test]
fn smooth_value_and_zero_terminal() {
    assert_eq!(InvValue::smooth().to_string(), "(1,0; inf)");
    let v: InvValue = "(5,0; 4/5,1; 0) mu=10".parse().unwrap();
    assert!(v > InvValue::smooth());
    assert!("(5,0; 0)".parse::<InvValue>().is_err());
    assert!("(5,0; inf) mu=2".parse::<InvValue>().is_err());
}

fn vars() -> Vec<String> {
    ["x", "y", "z"].iter().map(|s| s.to_string()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Runtime checks (value monotonicity, strict decrease at centres, the
    /// factorial integrality of nu and the recomputed divisor orders) stay
    /// clean on random binomial hypersurfaces, up to the first
    /// non-coordinate centre.
    #[test]
    fn runtime_checks_hold(a in 2u32..=4, b in 1u32..=4, c in 1u32..=4, variant in prop_oneof![
        Just(Variant::Bm), Just(Variant::V), Just(Variant::EvOnBm), Just(Variant::EvOnV)
    ]) {
        let g = parse_poly(&format!("z^{a} - x^{b}*y^{c}"), &vars()).unwrap();
        let mut t = Tower::init(vec![g], vars(), &[], Mode::Embedded, variant).unwrap();
        t.chart_limit = 400;
        match t.run(6) {
            Ok(_) | Err(TowerError::NonCoordinateCentre { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
        prop_assert!(t.violations().is_empty(), "{:?}", t.violations());
    }
}
