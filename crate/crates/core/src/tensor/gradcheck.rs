//! Central finite-difference gradient checking.
//!
//! Used by the test suites to validate every backward rule against a
//! numerical oracle; exposed publicly so downstream test targets can check
//! whole model graphs the same way.

use super::{Tape, TensorError, TensorId};

/// Default perturbation for central differences.
pub const DEFAULT_H: f64 = 1e-5;

/// Default maximum relative error accepted in float64.
pub const DEFAULT_TOL: f64 = 1e-4;

/// Relative error with an absolute floor so that near-zero pairs compare
/// absolutely instead of blowing up.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-6 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Checks analytic gradients of a scalar function of several inputs.
///
/// `build` receives a tape plus one leaf per entry of `inputs` (in order)
/// and must return the scalar loss. The analytic gradient from
/// [`Tape::backward`] is compared elementwise against central finite
/// differences with step `h`; the largest [`relative_error`] is returned.
pub fn check<F>(build: F, inputs: &[(Vec<usize>, Vec<f64>)], h: f64) -> Result<f64, TensorError>
where
    F: Fn(&mut Tape, &[TensorId]) -> Result<TensorId, TensorError>,
{
    let eval = |values: &[Vec<f64>]| -> Result<f64, TensorError> {
        let mut tape = Tape::new();
        let ids = values
            .iter()
            .zip(inputs)
            .map(|(v, (shape, _))| tape.leaf(shape, v.clone(), false))
            .collect::<Result<Vec<_>, _>>()?;
        let loss = build(&mut tape, &ids)?;
        Ok(tape.value(loss)[0])
    };

    let mut tape = Tape::new();
    let ids = inputs
        .iter()
        .map(|(shape, data)| tape.leaf(shape, data.clone(), true))
        .collect::<Result<Vec<_>, _>>()?;
    let loss = build(&mut tape, &ids)?;
    tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| tape.grad(id).unwrap().to_vec())
        .collect();

    let mut values: Vec<Vec<f64>> = inputs.iter().map(|(_, d)| d.clone()).collect();
    let mut worst = 0.0f64;
    for i in 0..values.len() {
        for j in 0..values[i].len() {
            let orig = values[i][j];
            values[i][j] = orig + h;
            let up = eval(&values)?;
            values[i][j] = orig - h;
            let down = eval(&values)?;
            values[i][j] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(analytic[i][j], numeric));
        }
    }
    Ok(worst)
}

/// [`check`] with the default step and tolerance; panics with a diagnostic
/// on failure so tests read as one line.
pub fn assert_gradients<F>(build: F, inputs: &[(Vec<usize>, Vec<f64>)])
where
    F: Fn(&mut Tape, &[TensorId]) -> Result<TensorId, TensorError>,
{
    let worst = check(build, inputs, DEFAULT_H).expect("gradient check graph failed to build");
    assert!(
        worst < DEFAULT_TOL,
        "max relative gradient error {worst:.3e} exceeds {DEFAULT_TOL:.0e}"
    );
}
