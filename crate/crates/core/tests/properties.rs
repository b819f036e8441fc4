use proptest::prelude::*;

use svir_core::algebra::{bracket, AlgebraConfig, Element, Epsilon};
use svir_core::automorphisms::{fit_single, AutParams, Sign};
use svir_core::derivations::{ad_matrix, local_der_at};
use svir_core::linalg::{column_image, solve, Matrix, Solution, Subspace, Window};
use svir_core::scalar::Scalar;
use svir_core::text::parse_element;

fn scalar() -> impl Strategy<Value = Scalar> {
    (-6i64..=6, 1i64..=4, -6i64..=6, 1i64..=4).prop_map(|(a, b, c, d)| Scalar::gaussian(a, b, c, d))
}

fn nonzero_scalar() -> impl Strategy<Value = Scalar> {
    scalar().prop_filter("nonzero", |s| !s.is_zero())
}

fn config() -> impl Strategy<Value = AlgebraConfig> {
    (0usize..4).prop_map(|i| AlgebraConfig::all()[i])
}

fn element_in(cfg: AlgebraConfig, radius: i64, max_terms: usize) -> impl Strategy<Value = Element> {
    let basis = cfg.basis_window(radius);
    prop::collection::vec((0..basis.len(), scalar()), 0..=max_terms)
        .prop_map(move |terms| Element::from_terms(terms.into_iter().map(|(i, c)| (basis[i], c))))
}

fn config_and_elements(n: usize) -> impl Strategy<Value = (AlgebraConfig, Vec<Element>)> {
    config().prop_flat_map(move |cfg| (Just(cfg), prop::collection::vec(element_in(cfg, 3, 4), n)))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    // small integer entries with many zeros, so that rank deficiency is common
    let entry = prop_oneof![3 => Just(0i64), 2 => -2i64..=2];
    prop::collection::vec(prop::collection::vec(entry.prop_map(Scalar::from_int), cols), rows)
        .prop_map(|r| Matrix::from_rows(r).unwrap())
}

fn params(cfg: AlgebraConfig) -> BoxedStrategy<AutParams> {
    let sign = prop_oneof![Just(Sign::Plus), Just(Sign::Minus)];
    let unit = prop_oneof![Just(1i64), Just(-1i64)];
    if cfg.epsilon == Epsilon::Half {
        (sign, nonzero_scalar(), unit)
            .prop_map(|(eps, h, u)| {
                let s = if eps == Sign::Plus { Scalar::from_int(u) } else { &Scalar::i() * &Scalar::from_int(u) };
                AutParams::from_root(eps, h, s)
            })
            .boxed()
    } else {
        (sign, nonzero_scalar(), unit)
            .prop_map(move |(eps, a, u)| {
                let s = if eps == Sign::Plus { Scalar::from_int(u) } else { &Scalar::i() * &Scalar::from_int(u) };
                AutParams::new(&cfg, eps, a, s, None).unwrap()
            })
            .boxed()
    }
}

fn config_and_params(n: usize) -> impl Strategy<Value = (AlgebraConfig, Vec<AutParams>)> {
    config().prop_flat_map(move |cfg| (Just(cfg), prop::collection::vec(params(cfg), n)))
}

fn dim_window(cfg: AlgebraConfig, n: usize) -> Window {
    Window::new(cfg, cfg.basis_window(3).into_iter().take(n).collect()).unwrap()
}

proptest! {
    #[test]
    fn field_axioms(a in scalar(), b in scalar(), c in scalar()) {
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert_eq!(&a - &a, Scalar::zero());
        if let Some(inv) = a.inv() {
            prop_assert_eq!(&a * &inv, Scalar::one());
        } else {
            prop_assert!(a.is_zero());
        }
    }

    #[test]
    fn power_law(a in nonzero_scalar(), m in -5i64..=5, n in -5i64..=5) {
        let lhs = a.int_pow(m + n).unwrap();
        let rhs = &a.int_pow(m).unwrap() * &a.int_pow(n).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn scalar_text_round_trip(a in scalar()) {
        prop_assert_eq!(a.to_string().parse::<Scalar>().unwrap(), a);
    }

    #[test]
    fn element_text_round_trip((cfg, xs) in config_and_elements(1)) {
        let x = &xs[0];
        let text = x.to_string();
        prop_assert_eq!(&parse_element(&cfg, &text).unwrap(), x);
        prop_assert_eq!(parse_element(&cfg, &text).unwrap().to_string(), text);
    }

    #[test]
    fn rref_is_idempotent(a in matrix(4, 5)) {
        let r = a.rref();
        prop_assert_eq!(r.matrix.rref(), r.clone());
        prop_assert_eq!(a.transpose().rref().rank, r.rank);
    }

    #[test]
    fn kernel_is_annihilated(a in matrix(4, 6)) {
        let kernel = a.kernel();
        prop_assert_eq!(kernel.len() + a.rref().rank, 6);
        for v in kernel {
            prop_assert!(a.mul_vec(&v).unwrap().iter().all(Scalar::is_zero));
        }
    }

    #[test]
    fn membership_agrees_with_solving(a in matrix(6, 3), b in prop::collection::vec(-2i64..=2, 6)) {
        let cfg = AlgebraConfig::centerless();
        let w = dim_window(cfg, 6);
        let b: Vec<Scalar> = b.into_iter().map(Scalar::from_int).collect();
        let image = column_image(&a, &w).unwrap();
        let inside = image.contains(&w.element(&b)).unwrap();
        match solve(&a, &b).unwrap() {
            Solution::Inconsistent => prop_assert!(!inside),
            sol => {
                prop_assert!(inside);
                prop_assert_eq!(a.mul_vec(sol.particular().unwrap()).unwrap(), b);
            }
        }
    }

    #[test]
    fn grassmann_identity(u in matrix(3, 6), v in matrix(3, 6)) {
        let cfg = AlgebraConfig::centerless();
        let w = dim_window(cfg, 6);
        let su = Subspace::span_coords(w.clone(), &u.row_vectors()).unwrap();
        let sv = Subspace::span_coords(w, &v.row_vectors()).unwrap();
        let sum = su.sum(&sv).unwrap();
        let meet = su.intersect(&sv).unwrap();
        prop_assert_eq!(sum.dim() + meet.dim(), su.dim() + sv.dim());
        for b in meet.basis_elements() {
            prop_assert!(su.contains(&b).unwrap() && sv.contains(&b).unwrap());
        }
    }

    #[test]
    fn bracket_is_bilinear((cfg, xs) in config_and_elements(3), c in scalar()) {
        let (x, y, z) = (&xs[0], &xs[1], &xs[2]);
        let mut xc = x.scale(&c);
        xc.add_scaled(y, &Scalar::one());
        let lhs = bracket(&cfg, &xc, z).unwrap();
        let mut rhs = bracket(&cfg, x, z).unwrap().scale(&c);
        rhs.add_scaled(&bracket(&cfg, y, z).unwrap(), &Scalar::one());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn group_laws((cfg, ps) in config_and_params(3), (xcfg, xs) in config_and_elements(1)) {
        let (p, q, r) = (&ps[0], &ps[1], &ps[2]);
        let id = AutParams::identity(&cfg);
        prop_assert_eq!(p.compose(&p.invert()), id.clone());
        prop_assert_eq!(p.invert().compose(p), id.clone());
        prop_assert_eq!(p.compose(&id), p.clone());
        prop_assert_eq!(p.compose(q).compose(r), p.compose(&q.compose(r)));
        prop_assert_eq!(p.invert().invert(), p.clone());
        if xcfg == cfg {
            let x = &xs[0];
            let direct = p.compose(q).apply(&cfg, x).unwrap();
            let nested = p.apply(&cfg, &q.apply(&cfg, x).unwrap()).unwrap();
            prop_assert_eq!(direct, nested);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_recovers_the_applied_member((cfg, ps) in config_and_params(1), x_seed in prop::collection::vec((0usize..1000, nonzero_scalar()), 1..4)) {
        let p = &ps[0];
        let basis = cfg.basis_window(3);
        let x = Element::from_terms(x_seed.into_iter().map(|(i, c)| (basis[i % basis.len()], c)));
        prop_assume!(!x.is_zero());
        let image = p.apply(&cfg, &x).unwrap();
        let fam = fit_single(&cfg, &x, &image).unwrap();
        prop_assert!(fam.contains(p));
        let (members, _) = fam.solutions();
        for m in members {
            prop_assert_eq!(m.apply(&cfg, &x).unwrap(), image.clone());
        }
    }

    #[test]
    fn local_witness_agrees_with_column_image((cfg, xs) in config_and_elements(2)) {
        let (x, v) = (&xs[0], &xs[1]);
        let ansatz = Window::radius(cfg, 3);
        let target = Window::radius(cfg, 6);
        let image = column_image(&ad_matrix(&cfg, x, &ansatz, &target).unwrap(), &target).unwrap();
        let report = local_der_at(&cfg, x, v, &ansatz).unwrap();
        if x.is_zero() && !v.is_zero() {
            prop_assert!(report.witness().is_none());
        } else {
            prop_assert_eq!(report.witness().is_some(), image.contains(v).unwrap());
        }
        if let Some(y) = report.witness() {
            prop_assert_eq!(&bracket(&cfg, y, x).unwrap(), v);
        }
    }
}
