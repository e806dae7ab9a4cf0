//! Named input generators shared by the command-line tool, the examples and
//! the integration tests.
//!
//! Each generator produces a fixed, documented grid so that runs referring
//! to a builtin by name are reproducible without shipping data files. The
//! only random one, [`random`], is a pure function of its seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// The names accepted by [`builtin`].
pub const BUILTIN_NAMES: &[&str] = &["indicator", "linear_ramp", "superharmonic3d", "random"];

/// The unit indicator on a wide line: `f = 1` on `[0, 1]`, `0` elsewhere,
/// sampled at cell centers on `[-64, 65]` with 4096 cells.
///
/// The sampled function is exactly the indicator of a block of whole cells,
/// so its uncentered norm ratio matches the continuum value of a slightly
/// shifted interval — a scale-invariant quantity — up to `O(h^2)`.
pub fn indicator() -> Result<GridFunction> {
    let n = 4096;
    let h = 129.0 / n as f64;
    GridFunction::from_fn(vec![n], vec![-64.0], h, |x| {
        if (0.0..=1.0).contains(&x[0]) {
            1.0
        } else {
            0.0
        }
    })
}

/// The ramp `f(x) = x` on `[0, 1]` with 256 cells. Strictly positive at
/// every cell center, with plenty of spread for partition demonstrations.
pub fn linear_ramp() -> Result<GridFunction> {
    GridFunction::from_fn(vec![256], vec![0.0], 1.0 / 256.0, |x| x[0])
}

/// The profile `f = min(|x|^{-1}, 1)` on `[-8, 8]^3` with 64 cells per axis:
/// superharmonic away from the unit sphere, so centered ball averages that
/// stay inside the domain never beat the center value.
pub fn superharmonic3d() -> Result<GridFunction> {
    GridFunction::from_fn(vec![64; 3], vec![-8.0; 3], 0.25, |x| {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        (1.0 / r).min(1.0)
    })
}

/// A smooth strictly positive density on `[0, 1)^2` with 64 cells per axis:
/// a constant floor plus three seeded Gaussian bumps. Suitable for partition,
/// covering and dichotomy runs out of the box.
pub fn random(seed: u64) -> Result<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(f64, [f64; 2], f64)> = (0..3)
        .map(|_| {
            let amp = rng.gen_range(0.3..1.5);
            let c = [rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)];
            let w = rng.gen_range(0.05..0.2);
            (amp, c, w)
        })
        .collect();
    GridFunction::from_fn(vec![64; 2], vec![0.0; 2], 1.0 / 64.0, |x| {
        let mut v = 0.2;
        for (amp, c, w) in &bumps {
            let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
            v += amp * (-d2 / (2.0 * w * w)).exp();
        }
        v
    })
}

/// Looks up a generator by name. `seed` only matters for `random`.
pub fn builtin(name: &str, seed: u64) -> Result<GridFunction> {
    match name {
        "indicator" => indicator(),
        "linear_ramp" => linear_ramp(),
        "superharmonic3d" => superharmonic3d(),
        "random" => random(seed),
        other => Err(Error::Config(format!(
            "unknown builtin {other:?}; expected one of {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}
