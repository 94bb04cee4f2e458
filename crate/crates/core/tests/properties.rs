use landau_lab::fit::{geomspace, loglog_slope};
use landau_lab::run::{fmt_f64, validate_config, Cell, Csv, RunConfig};
use proptest::prelude::*;

proptest! {
    #[test]
    fn csv_cells_parse_back_exactly(xs in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 1..20)) {
        let mut csv = Csv::new(&["i", "x"]);
        for (i, x) in xs.iter().enumerate() {
            csv.row(&[Cell::I(i as i64), Cell::F(*x)]);
        }
        let back: Vec<f64> = csv.as_str().lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        prop_assert_eq!(back, xs);
    }

    #[test]
    fn config_survives_json_round_trip(gamma in -2.0f64..1.0, degree in 2usize..12, seed in any::<u64>(), delta in 0.5f64..1.0) {
        let mut c = RunConfig::default();
        c.gamma = gamma;
        c.degree = degree;
        c.seed = seed;
        c.delta = delta;
        let back = validate_config(&serde_json::to_string(&c).unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn power_law_slope_is_recovered(a in -4.0f64..1.0, c in 0.1f64..10.0) {
        let t = geomspace(1e2, 1e4, 17);
        let v: Vec<f64> = t.iter().map(|t| c * t.powf(a)).collect();
        let fit = loglog_slope(&t, &v).unwrap();
        prop_assert!((fit.slope - a).abs() < 1e-10);
    }

    #[test]
    fn formatted_floats_are_fixed_width(x in 1e-300f64..1e300) {
        let s = fmt_f64(x);
        prop_assert_eq!(s.split('e').next().unwrap().len(), 18);
    }
}
