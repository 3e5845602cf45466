mod common;

use meeql::library::{DesignMatrix, LibrarySpec};
use meeql::mfm::{solve_mfm, MfmParams};
use meeql::numderiv::DerivativeOptions;
use meeql::sparse::{
    aic_score, coordinate_descent, lasso, learn, majority_mask, select_lambda, CvProtocol, Gram, LambdaRecord,
    LassoOptions, LearningData, SplitFit,
};
use proptest::prelude::*;

use common::{lasso_objective, lattice_lasso};

fn rows_strategy(p: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, p), 16..24)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn single_feature_is_soft_threshold(
        xs in prop::collection::vec(-3.0f64..3.0, 3..30),
        noise in prop::collection::vec(-1.0f64..1.0, 30),
        slope in -4.0f64..4.0,
        lambda in 0.0f64..20.0,
    ) {
        let gram: f64 = xs.iter().map(|x| x * x).sum();
        prop_assume!(gram > 1e-3);
        let ys: Vec<f64> = xs.iter().zip(&noise).map(|(x, e)| slope * x + e).collect();
        let b: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let expected = b.signum() * (b.abs() - lambda / 2.0).max(0.0) / gram;
        let theta = DesignMatrix::from_rows(&xs.iter().map(|x| vec![*x]).collect::<Vec<_>>()).unwrap();
        let got = lasso(&theta, &ys, lambda).unwrap()[0];
        prop_assert!((got - expected).abs() <= 1e-8 * (1.0 + expected.abs()), "{got} vs {expected}");
    }

    #[test]
    fn two_terms_match_lattice_search(
        rows in rows_strategy(2),
        truth in prop::array::uniform2(-1.5f64..1.5),
        lambda in 0.0f64..6.0,
    ) {
        let y: Vec<f64> = rows.iter().map(|r| r[0] * truth[0] + r[1] * truth[1]).collect();
        let theta = DesignMatrix::from_rows(&rows).unwrap();
        let cd = lasso(&theta, &y, lambda).unwrap();
        let h = 0.01;
        let grid = lattice_lasso(&rows, &y, lambda, 3.0, h);
        prop_assume!(grid.iter().all(|g| g.abs() < 3.0 - h));
        // The solver can only beat the lattice, never lose to it.
        prop_assert!(lasso_objective(&rows, &y, &cd, lambda) <= lasso_objective(&rows, &y, &grid, lambda) + 1e-9);
        for (a, g) in cd.iter().zip(&grid) {
            prop_assert!((a - g).abs() <= 2.0 * h, "cd {cd:?} lattice {grid:?}");
        }
    }

    #[test]
    fn objective_never_increases_across_sweeps(
        rows in rows_strategy(3),
        y in prop::collection::vec(-2.0f64..2.0, 24),
        lambda in 0.0f64..3.0,
    ) {
        let y = &y[..rows.len()];
        let theta = DesignMatrix::from_rows(&rows).unwrap();
        let gram = Gram::new(&theta, y).unwrap();
        let mut trace = Vec::new();
        let fit = coordinate_descent(&gram, lambda, None, &LassoOptions::default(), Some(&mut trace));
        prop_assert!(!trace.is_empty());
        for w in trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{} then {}", w[0], w[1]);
        }
        let direct = lasso_objective(&rows, y, &fit.coefficients, lambda);
        prop_assert!((direct - gram.objective(&fit.coefficients, lambda)).abs() <= 1e-9 * direct.max(1.0));
    }

    #[test]
    fn majority_vote_ignores_order(
        masks in prop::collection::vec(prop::collection::vec(any::<bool>(), 4), 1..12),
        rotate in 0usize..12,
    ) {
        let reference = majority_mask(&masks);
        let mut reversed = masks.clone();
        reversed.reverse();
        let mut rotated = masks.clone();
        rotated.rotate_left(rotate % masks.len());
        prop_assert_eq!(&majority_mask(&reversed), &reference);
        prop_assert_eq!(&majority_mask(&rotated), &reference);
        let (mask, count) = reference.unwrap();
        prop_assert_eq!(masks.iter().filter(|m| **m == mask).count(), count);
        prop_assert!(masks.iter().all(|m| masks.iter().filter(|o| *o == m).count() <= count));
    }

    #[test]
    fn selected_lambda_is_on_grid_and_above_argmin(
        aics in prop::collection::vec(-100.0f64..100.0, 5..30),
        maxima in prop::collection::vec(0.0f64..200.0, 30),
    ) {
        let protocol = CvProtocol::oat(0);
        let records: Vec<LambdaRecord> = aics
            .iter()
            .enumerate()
            .map(|(j, &a)| LambdaRecord {
                lambda: 10f64.powi(j as i32 - 10),
                mean_aic: a,
                splits: vec![SplitFit { coefficients: vec![maxima[j], 0.0], test_sse: 1.0, aic: a }],
            })
            .collect();
        let argmin = (0..aics.len()).fold(0, |m, j| if aics[j] < aics[m] { j } else { m });
        match select_lambda(&records, &protocol) {
            Ok(sel) => {
                prop_assert!(sel.index >= argmin);
                prop_assert_eq!(sel.lambda, records[sel.index].lambda);
                prop_assert!(maxima[sel.index] <= protocol.coeff_threshold);
                prop_assert!((argmin..sel.index).all(|j| maxima[j] > protocol.coeff_threshold));
            }
            Err(_) => prop_assert!((argmin..aics.len()).all(|j| maxima[j] > protocol.coeff_threshold)),
        }
    }

    #[test]
    fn aic_grows_with_error_and_terms(sse in 1e-8f64..1e3, n in 5usize..500, k in 0usize..10) {
        prop_assert!(aic_score(sse * 1.5, n, k) > aic_score(sse, n, k));
        prop_assert!((aic_score(sse, n, k + 1) - aic_score(sse, n, k) - 2.0).abs() <= 1e-9 * aic_score(sse, n, k).abs().max(1.0));
    }
}

#[test]
fn active_set_shrinks_along_the_path() {
    let ts = solve_mfm(&MfmParams::new(1.0, 0.05)).unwrap();
    let data = LearningData::new(&[(1.0, &ts)], LibrarySpec::plain(10), &DerivativeOptions::mean_field()).unwrap();
    let gram = Gram::new(&data.theta, &data.target).unwrap();
    let grid = meeql::sparse::log_grid(1e-9, 1e-1, 100);
    let mut previous = 0;
    let mut converged = 0;
    let mut warm: Option<Vec<f64>> = None;
    for &lambda in grid.iter().rev() {
        let fit = coordinate_descent(&gram, lambda, warm.as_deref(), &LassoOptions::default(), None);
        // Past the sweep cap the iterate is not a minimiser, so the path says nothing there.
        if !fit.converged {
            break;
        }
        let active = fit.coefficients.iter().filter(|c| **c != 0.0).count();
        assert!(active >= previous, "lambda {lambda:e}: {active} active after {previous}");
        previous = active;
        converged += 1;
        warm = Some(fit.coefficients);
    }
    assert!(converged >= 50, "only {converged} converged fits");
    assert!(previous >= 3);
}

#[test]
fn learned_coefficients_respect_the_threshold() {
    let ts = solve_mfm(&MfmParams::new(2.0, 0.05)).unwrap();
    let data = LearningData::new(&[(2.0, &ts)], LibrarySpec::plain(10), &DerivativeOptions::mean_field()).unwrap();
    let protocol = CvProtocol {
        lambda_grid: meeql::sparse::log_grid(1e-9, 1e-1, 30),
        n_splits: 4,
        ..CvProtocol::oat(5)
    };
    let out = learn(&data, &protocol, Some(2.0)).unwrap();
    assert!(out.model.coefficients.iter().all(|c| c.abs() <= protocol.coeff_threshold));
    assert_eq!(out.model.coefficients.len(), out.model.active_degrees().len());
    assert_eq!(out.model.active_degrees(), [1, 2]);
    assert!(out.selection.index >= out.selection.argmin_index);
}
