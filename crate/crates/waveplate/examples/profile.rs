use std::time::Instant;
use waveplate::spectral::{eig_odelta_r, linear_trend, resolved_pairs, witness};

fn main() {
    let mesh = waveplate::mesh::gen_lens(90f64.to_radians(), 60f64.to_radians(), 24).unwrap();
    let sys = waveplate::system::build_generator(&mesh, 0.3).unwrap();
    let t0 = Instant::now();
    let pairs = eig_odelta_r(&sys, 26).unwrap();
    println!("eigs {:?}; worst pair residual {:.2e}", t0.elapsed(),
        pairs.iter().map(|p| p.residual).fold(0.0f64, f64::max));
    let resolved = resolved_pairs(&pairs, mesh.h);
    let first20: Vec<_> = resolved.into_iter().take(20).collect();
    let points = witness(&first20, &sys).unwrap();
    let worst = points.iter().map(|p| p.residual).fold(0.0f64, f64::max);
    println!("witness worst residual {worst:.3e}, min U {:.6}",
        points.iter().map(|p| p.u_norm).fold(f64::INFINITY, f64::min));
    let logf: Vec<(f64, f64)> = points.iter().map(|p| (p.mu.ln(), p.f_norm.ln())).collect();
    println!("F slope {:.3}; bounds {:.3} -> {:.3}", linear_trend(&logf),
        points[0].u_norm / points[0].f_norm, points[19].u_norm / points[19].f_norm);
}
