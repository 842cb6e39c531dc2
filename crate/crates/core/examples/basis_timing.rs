use std::time::Instant;

use poolvcm::gpp::{cross_correlation, factor_knots, AgeLayout, CoefBasis, Matern};
use poolvcm::linalg;

fn main() {
    let ages: Vec<f64> = (0..3000).map(|i| ((i * 7919) % 601) as f64 / 100.0 - 3.0).collect();
    let layout = AgeLayout::equally_spaced(&ages, 100).unwrap();
    let kernel = Matern::new(2.0);
    let reps = 200;
    let t = Instant::now();
    for r in 0..reps {
        let _ = factor_knots(&kernel, &layout.knots, 0.3 + r as f64 * 1e-4).unwrap();
    }
    println!("factor {:.3} ms", t.elapsed().as_secs_f64() / reps as f64 * 1e3);
    let t = Instant::now();
    for r in 0..reps {
        let _ = poolvcm::gpp::knot_correlation(&kernel, &layout.knots, 0.3 + r as f64 * 1e-4, 0.0);
    }
    println!("knot corr {:.3} ms", t.elapsed().as_secs_f64() / reps as f64 * 1e3);
    let r0 = poolvcm::gpp::knot_correlation(&kernel, &layout.knots, 0.3, 1e-10);
    let t = Instant::now();
    for _ in 0..reps {
        let mut a = r0.clone();
        linalg::cholesky_in_place(&mut a, 100).unwrap();
    }
    println!("chol {:.3} ms", t.elapsed().as_secs_f64() / reps as f64 * 1e3);
    let mut cross = Vec::new();
    let t = Instant::now();
    for r in 0..reps {
        cross_correlation(&kernel, &layout.unique_ages, &layout.knots, 0.3 + r as f64 * 1e-4, 1e-10, &mut cross);
    }
    println!("cross {:.3} ms ({} entries)", t.elapsed().as_secs_f64() / reps as f64 * 1e3, cross.len());
    let (chol, nug) = factor_knots(&kernel, &layout.knots, 0.3).unwrap();
    let t = Instant::now();
    for _ in 0..reps {
        let _ = CoefBasis::from_factor(&layout, 0.3, chol.clone(), nug, cross.clone());
    }
    println!("from_factor {:.3} ms", t.elapsed().as_secs_f64() / reps as f64 * 1e3);
    let t = Instant::now();
    for _ in 0..reps {
        let mut c = cross.clone();
        linalg::solve_lower_rows(&chol, 100, &mut c, layout.n_unique());
    }
    println!("trsm {:.3} ms", t.elapsed().as_secs_f64() / reps as f64 * 1e3);
    let mut tt = vec![0.0; cross.len()];
    let t = Instant::now();
    for _ in 0..reps {
        linalg::transpose(&cross, layout.n_unique(), 100, &mut tt);
    }
    println!("transpose {:.3} ms", t.elapsed().as_secs_f64() / reps as f64 * 1e3);
    let b = CoefBasis::from_factor(&layout, 0.3, chol, nug, cross);
    let k = layout.n_unique();
    let mut g = vec![0.0; 100 * 100];
    let t = Instant::now();
    for _ in 0..reps {
        linalg::gemm(100, k, 100, 1.0, &b.h_centered, true, &b.h_centered, false, 0.0, &mut g);
    }
    println!("gram {:.3} ms", t.elapsed().as_secs_f64() / reps as f64 * 1e3);
}
