#![no_main]

use corrwitness::operator::{density_violations, DensityOperator, Space, SpaceDims};
use corrwitness::Tolerances;
use libfuzzer_sys::fuzz_target;
use nalgebra::DMatrix;
use num_complex::Complex64;

// First byte picks the shape, the rest fills entries as f64 pairs.
fuzz_target!(|data: &[u8]| {
    let Some((&shape, rest)) = data.split_first() else {
        return;
    };
    let (s, e) = (1 + (shape & 3) as usize, 1 + ((shape >> 2) & 3) as usize);
    let n = s * e;
    let mut values = rest
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()));
    let m = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(values.next().unwrap_or(0.0), values.next().unwrap_or(0.0))
    });
    let space = match SpaceDims::new(s, e) {
        Ok(dims) if shape & 16 != 0 => Space::Bipartite(dims),
        _ => Space::Flat(n),
    };
    let tol = Tolerances::default();
    let violations = density_violations(&m, space, &tol);
    let accepted = DensityOperator::with_tolerances(m, space, &tol);
    assert_eq!(violations.is_empty(), accepted.is_ok());
});
