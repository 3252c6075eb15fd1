//! Build a Gaussian blur, apply it to a spike and check the adjoint identity.

use motion_deconv::conv::{gaussian_kernel, ConvOperator, SamplingMask};
use motion_deconv::{Field, Grid};

fn main() -> motion_deconv::Result<()> {
    let grid = Grid::square(50);
    let kernel = gaussian_kernel(41, 41, 4.0)?;
    println!(
        "41x41 kernel, sigma 4: center {:.6e}, corner {:.6e}, sum {:.15}",
        kernel.weight(0, 0),
        kernel.weight(20, 20),
        kernel.weights().iter().sum::<f64>()
    );

    let op = ConvOperator::new(grid, kernel.clone());
    let spike = Field::zeros(grid).with_value(25, 25, 1.0);
    let image = op.forward(&spike)?;
    println!(
        "blurred spike: peak {:.6e}, mass {:.15}",
        image.max_abs(),
        image.sum()
    );

    // keep every other column
    let mask = SamplingMask::new(grid, (0..grid.len()).map(|i| i % 2 == 0).collect())?;
    let masked = ConvOperator::with_mask(grid, kernel, mask)?;
    let u = Field::from_fn(grid, |r, c| ((r * 31 + c * 17) as f64).sin());
    let v = Field::from_fn(grid, |r, c| ((r * 7 + c * 3) as f64 * 0.1).cos());
    let lhs = masked.forward(&u)?.dot(&v)?;
    let rhs = u.dot(&masked.adjoint(&v)?)?;
    println!(
        "<Au, v> = {lhs:.15e}\n<u, A'v> = {rhs:.15e}\nrelative gap {:.2e}",
        (lhs - rhs).abs() / lhs.abs()
    );

    let fast = masked.forward(&u)?;
    let direct = masked.forward_direct(&u)?;
    println!(
        "separable vs direct stencil: max difference {:.2e}",
        fast.sub(&direct)?.max_abs()
    );
    Ok(())
}
