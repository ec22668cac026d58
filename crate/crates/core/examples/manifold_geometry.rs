//! Tangent projection and retraction on the product manifold.
//!
//! A random ambient direction is projected onto the tangent space of a
//! random feasible point, then the point is retracted along it with a few
//! step sizes. The power and unit-modulus constraints hold at every step.

use polarisac::manifold::{feasibility_residual, inner_product, point_distance, project_to_tangent, random_point, retract};
use polarisac::ScenarioConfig;

fn main() -> polarisac::Result<()> {
    let cfg = ScenarioConfig::desk();
    let x = random_point(&cfg, 3);
    let y = random_point(&cfg, 4);
    println!("feasibility residual of x: {:.2e}", feasibility_residual(&x, &cfg));
    println!("|W|_F^2 = {:.6}, P = {:.6}", x.w.norm_squared(), cfg.power());

    // Any two points share the block layout, so their difference is an ambient direction.
    let ambient = polarisac::TangentVector {
        w: &y.w - &x.w,
        p_tx: y.p_tx.iter().zip(&x.p_tx).map(|(a, b)| a - b).collect(),
        p_rx: y.p_rx.iter().zip(&x.p_rx).map(|(a, b)| a - b).collect(),
        p_users: y.p_users.iter().zip(&x.p_users).map(|(a, b)| a - b).collect(),
        f: &y.f - &x.f,
        a: 1.0,
        b: -1.0,
    };
    let v = project_to_tangent(&x, &ambient)?;
    let w_radial = inner_product(
        &polarisac::TangentVector { w: x.w.clone(), ..polarisac::TangentVector::zeros(x.shape()) },
        &v,
    )?;
    println!("<W, xi_W> after projection: {w_radial:.2e}");
    let twice = project_to_tangent(&x, &v)?;
    println!("projection idempotence gap: {:.2e}", twice.sub(&v)?.norm());

    println!("{:>8} {:>12} {:>12}", "step", "distance", "residual");
    for step in [0.0, 1e-3, 1e-1, 1.0, 10.0] {
        let z = retract(&x, &v, step)?;
        println!("{step:>8} {:>12.4e} {:>12.2e}", point_distance(&x, &z)?, feasibility_residual(&z, &cfg));
    }
    Ok(())
}
