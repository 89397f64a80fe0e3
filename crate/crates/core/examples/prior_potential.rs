// qGGMRF potential: quadratic near zero, close to linear for large jumps when p is near 1.

use cryo_mbir::grid::{GridSpec, Volume};
use cryo_mbir::prior::{prior_cost, prior_gradient, rho, rho_prime, QggmrfParams};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>8} {:>12} {:>12} {:>12}", "delta", "p=2", "p=1.5", "p=1.1");
    let shapes: Vec<QggmrfParams> = [2.0, 1.5, 1.1].iter().map(|&p| QggmrfParams::new(p, 0.01, 1.0)).collect::<Result<_, _>>()?;
    for delta in [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
        let r: Vec<String> = shapes.iter().map(|s| format!("{:>12.5}", rho(delta, s))).collect();
        println!("{delta:>8.2} {}", r.join(" "));
    }
    let p = &shapes[2];
    println!("rho'(10) / rho'(5) for p=1.1: {:.3}", rho_prime(10.0, p) / rho_prime(5.0, p));

    // A sharp step: the gradient is confined to the two layers at the edge.
    let params = QggmrfParams::default();
    let grid = GridSpec::cubic(8)?;
    let step = Volume::from_fn(grid, |x, _, _| if x < 4 { 0.0 } else { 1.0 });
    let grad = prior_gradient(&step, &params);
    println!("step cost {:.4}", prior_cost(&step, &params));
    for x in 0..8 {
        print!("{:+.3} ", grad.get(x, 4, 4));
    }
    println!();
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
