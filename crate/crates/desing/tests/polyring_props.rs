use desing::polyring::{bit, int, members, parse_poly, rat, ExpVec, ExtNat, Poly};
use proptest::prelude::*;

const NAMES: [&str; 5] = ["x", "y", "z", "w", "u"];

fn names(n: usize) -> Vec<String> {
    NAMES[..n].iter().map(|s| s.to_string()).collect()
}

fn poly(n: usize, max_terms: usize, max_exp: u32) -> impl Strategy<Value = Poly> {
    let term = (prop::collection::vec(0..=max_exp, n), -5i64..=5, 1i64..=3);
    prop::collection::vec(term, 1..=max_terms).prop_map(move |ts| {
        let terms = ts.into_iter().map(|(e, a, b)| (ExpVec(e), rat(a, b))).collect();
        Poly::from_terms(n, terms)
    })
}

fn sized_poly(max_terms: usize, max_exp: u32) -> impl Strategy<Value = Poly> {
    (1usize..=5).prop_flat_map(move |n| poly(n, max_terms, max_exp))
}

/// Nonzero polynomial with a centre, a chart index in it and an exponent
/// not above the order along the centre.
fn blowup_case() -> impl Strategy<Value = (Poly, u32, usize, u32)> {
    (2usize..=4)
        .prop_flat_map(|n| (poly(n, 3, 4), 1u32..(1 << n), any::<prop::sample::Index>(), any::<prop::sample::Index>()))
        .prop_filter_map("order zero along the centre", |(f, centre, i, d)| {
            let mu = f.order_along(centre).finite()?;
            if mu == 0 {
                return None;
            }
            let cs: Vec<usize> = members(centre).collect();
            Some((f, centre, cs[i.index(cs.len())], 1 + d.index(mu as usize) as u32))
        })
}

proptest! {
    #[test]
    fn display_parse_round_trip(f in sized_poly(4, 9)) {
        let vars = names(f.nvars());
        let s = f.display(&vars);
        prop_assert_eq!(parse_poly(&s, &vars).unwrap(), f);
    }

    #[test]
    fn ring_laws(f in poly(3, 3, 3), g in poly(3, 3, 3), h in poly(3, 3, 3)) {
        prop_assert_eq!(f.mul(&g), g.mul(&f));
        prop_assert_eq!(f.mul(&g.add(&h)), f.mul(&g).add(&f.mul(&h)));
        prop_assert!(f.sub(&f).is_zero());
    }

    #[test]
    fn leibniz_rule(f in poly(3, 3, 4), g in poly(3, 3, 4), v in 0usize..3) {
        prop_assert_eq!(f.mul(&g).diff(v), f.diff(v).mul(&g).add(&f.mul(&g.diff(v))));
    }

    #[test]
    fn derivative_drops_order_by_at_most_one(f in poly(3, 4, 5), v in 0usize..3) {
        let df = f.diff(v);
        if let (ExtNat::Fin(a), ExtNat::Fin(b)) = (f.min_degree(), df.min_degree()) {
            prop_assert!(b + 1 >= a);
        }
    }

    #[test]
    fn blowup_derivative_identities((f, centre, i, d) in blowup_case()) {
        let n = f.nvars();
        let yi = ExpVec::unit(n, i);
        let big_f = f.blowup_subst(centre, i).divide_exc(i, d).unwrap();
        for j in 0..n {
            let lhs = f.diff(j).blowup_subst(centre, i).divide_exc(i, d - 1).unwrap();
            let rhs = if centre & bit(j) == 0 {
                big_f.diff(j).mul_mono(&yi)
            } else if j != i {
                big_f.diff(j)
            } else {
                let mut r = big_f.scale(&int(d as i64)).add(&big_f.diff(i).mul_mono(&yi));
                for k in members(centre).filter(|&k| k != i) {
                    r = r.sub(&big_f.diff(k).mul_mono(&ExpVec::unit(n, k)));
                }
                r
            };
            prop_assert_eq!(lhs, rhs, "j = {}", j);
        }
    }

    #[test]
    fn log_derivatives_under_blowup(f in poly(3, 3, 4)) {
        let c = bit(0) | bit(1);
        let fs = f.blowup_subst(c, 0);
        let x = |k: usize| ExpVec::unit(3, k);
        prop_assert_eq!(f.diff(1).mul_mono(&x(1)).blowup_subst(c, 0), fs.diff(1).mul_mono(&x(1)));
        prop_assert_eq!(
            f.diff(0).mul_mono(&x(0)).blowup_subst(c, 0),
            fs.diff(0).mul_mono(&x(0)).sub(&fs.diff(1).mul_mono(&x(1)))
        );
        prop_assert_eq!(f.diff(2).blowup_subst(c, 0), fs.diff(2));
    }

    #[test]
    fn equimultiple_blowup_does_not_raise_order((f, centre, i, _d) in blowup_case()) {
        let mu = f.order_along(centre).finite().unwrap();
        prop_assume!(f.min_degree() == ExtNat::Fin(mu));
        let g = f.blowup_subst(centre, i).divide_exc(i, mu as u32).unwrap();
        prop_assert!(g.min_degree() <= ExtNat::Fin(mu));
    }
}

#[test]
fn parse_errors_are_reported() {
    let vars = names(3);
    for bad in ["", "x +", "x^", "x^-1", "q", "2**x", "(x", "x)"] {
        assert!(parse_poly(bad, &vars).is_err(), "{bad:?}");
    }
}

#[test]
fn blowup_of_family_chart() {
    let vars = ["x", "y", "z", "w"].map(String::from);
    let f = parse_poly("z^5*w^4 - x^4*y^5", &vars).unwrap();
    let g = f.blowup_subst(0b1111, 3).divide_exc(3, 9).unwrap();
    assert_eq!(g.display(&vars), "z^5 - x^4*y^5");
    assert!(f.blowup_subst(0b1111, 3).divide_exc(3, 10).is_err());
}
