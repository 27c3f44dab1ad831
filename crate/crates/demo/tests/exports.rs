use mesp_demo::{bound_curves, comparison, gap_curve, random_matrix_text};

#[test]
fn gap_curve_shrinks() {
    let text = random_matrix_text(8, 8, 1);
    let curve = gap_curve(&text, 3, 200, false).unwrap();
    let first = curve.points.first().unwrap().best_gap;
    let last = curve.points.last().unwrap().best_gap;
    assert!(last <= first);
    assert!(curve.primal <= curve.bound + 1e-12);
    let a = gap_curve(&text, 3, 200, true).unwrap();
    assert!(a.bound <= a.primal + 1e-12);
}

#[test]
fn comparison_is_sandwiched() {
    let text = random_matrix_text(7, 7, 2);
    for trace_problem in [false, true] {
        let c = comparison(&text, 3, 50, 0, trace_problem).unwrap();
        let exact = c.rows.iter().find(|r| r.role == "exact").unwrap().value;
        for r in &c.rows {
            let slack = 1e-7 * (1.0 + exact.abs());
            if r.role == "lower" {
                assert!(r.value <= exact + slack, "{}: {}", r.algorithm, r.value);
            } else if r.role == "upper" {
                assert!(r.value >= exact - slack, "{}: {}", r.algorithm, r.value);
            }
        }
    }
}

#[test]
fn bound_curves_cover_every_size() {
    let b = bound_curves(10, 0.0).unwrap();
    assert_eq!(b.s, (1..10).collect::<Vec<_>>());
    assert!(b.sampling.iter().zip(&b.factorial_sampling).all(|(a, n)| a <= &(n + 1e-12)));
    assert!(bound_curves(1, 0.0).is_err());
}

#[test]
fn matrix_market_input_accepted() {
    let text = "%%MatrixMarket matrix coordinate real symmetric\n3 3 3\n1 1 3\n2 2 2\n3 3 1\n";
    let c = comparison(text, 2, 10, 0, false).unwrap();
    let exact = c.rows.iter().find(|r| r.role == "exact").unwrap();
    assert!((exact.value - 6f64.ln()).abs() < 1e-12);
}

#[test]
fn low_rank_random_matrix_round_trips() {
    let text = random_matrix_text(10, 4, 3);
    let c = comparison(&text, 3, 20, 0, false).unwrap();
    assert_eq!(c.n, 10);
    assert!(comparison(&text, 5, 20, 0, false).is_err());
}
