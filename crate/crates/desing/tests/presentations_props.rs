use desing::polyring::{full_mask, int, rat, ExpVec, Poly, StratumSpec};
use desing::presentations::{
    delta_closure, in_locus, mu_along_divisor, parse_record, plain_derivative_augment, Contact, Divisor, MarkedFn,
    Presentation,
};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn binomial(n: usize) -> impl Strategy<Value = Poly> {
    let term = (prop::collection::vec(0u32..=4, n), prop_oneof![-4i64..=-1, 1i64..=4]);
    (term.clone(), term).prop_filter_map("zero binomial", move |((e1, c1), (e2, c2))| {
        let p = Poly::from_terms(n, vec![(ExpVec(e1), int(c1)), (ExpVec(e2), int(c2))]);
        (!p.is_zero()).then_some(p)
    })
}

fn single(n: usize, f: &MarkedFn) -> Presentation {
    Presentation::new(n, vec![f.clone()], BTreeMap::new())
}

fn names(n: usize) -> Vec<String> {
    ["x", "y", "z", "w", "u"][..n].iter().map(|s| s.to_string()).collect()
}

proptest! {
    #[test]
    fn closure_has_the_same_locus((n, f, mu) in (1usize..=4).prop_flat_map(|n| (Just(n), binomial(n), 1i64..=4))) {
        let m = MarkedFn::new(f, int(mu));
        let closed = delta_closure(std::slice::from_ref(&m), mu as usize - 1, 0, full_mask(n));
        let closed = Presentation::new(n, closed, BTreeMap::new());
        for s in StratumSpec::all(n) {
            prop_assert_eq!(in_locus(&single(n, &m), &s), in_locus(&closed, &s), "stratum {:b}", s.zero);
        }
    }

    #[test]
    fn closure_contains_its_input((n, f, mu) in (1usize..=4).prop_flat_map(|n| (Just(n), binomial(n), 1i64..=4))) {
        let m = MarkedFn::new(f, int(mu));
        let closed = delta_closure(std::slice::from_ref(&m), 2, 0, full_mask(n));
        prop_assert_eq!(&closed[0], &m);
        prop_assert!(closed.iter().all(|c| c.mu >= int(mu - 2)));
    }

    #[test]
    fn derivatives_do_not_raise_divisor_order((f, mu) in (binomial(3), 2i64..=5)) {
        let exc: BTreeMap<usize, Divisor> = [(0, Divisor { id: 0, birth_year: 1 })].into_iter().collect();
        let p = Presentation::new(3, vec![MarkedFn::new(f, int(mu))], exc);
        let o = StratumSpec::origin(3);
        prop_assert!(mu_along_divisor(&plain_derivative_augment(&p), 0, &o) <= mu_along_divisor(&p, 0, &o));
    }

    #[test]
    fn record_round_trip((f, g, a, b) in (binomial(4), binomial(4), 1i64..=6, 1i64..=3)) {
        let exc: BTreeMap<usize, Divisor> = [(0, Divisor { id: 1, birth_year: 2 }), (3, Divisor { id: 4, birth_year: 7 })]
            .into_iter()
            .collect();
        let mut p = Presentation::new(4, vec![MarkedFn::new(f, rat(a, b)), MarkedFn::new(g, int(a))], exc);
        p.contact.push(Contact::coordinate(4, 2));
        let vars = names(4);
        let (v2, q) = parse_record(&p.record(&vars)).unwrap();
        prop_assert_eq!(v2, vars);
        prop_assert_eq!(q, p);
    }
}

#[test]
fn divisor_order_before_and_after_derivatives() {
    for d in [3i64, 4, 5, 7] {
        let vars = names(3);
        let h = desing::polyring::parse_poly(&format!("x^{}*y^{}", d - 1, d - 1), &vars).unwrap();
        let exc: BTreeMap<usize, Divisor> =
            [(0, Divisor { id: 0, birth_year: 1 }), (1, Divisor { id: 1, birth_year: 2 })].into_iter().collect();
        let p = Presentation::new(3, vec![MarkedFn::new(h, int(d))], exc);
        let o = StratumSpec::origin(3);
        assert_eq!(mu_along_divisor(&p, 0, &o), rat(d - 1, d));
        assert_eq!(mu_along_divisor(&plain_derivative_augment(&p), 0, &o), rat(d - 2, d - 1));
    }
}

#[test]
fn malformed_records_are_rejected() {
    for bad in
        ["", "vars: x\n", "vars: x, y\ncontact: q\nmarked:\nexc:\n", "vars: x\ncontact:\nmarked: (x, 1/0)\nexc:\n"]
    {
        assert!(parse_record(bad).is_err(), "{bad:?}");
    }
}
