// Radial CTF: tabulate h(k), locate its zeros and show the phase-flip filter.

use cryo_mbir::ctf::{build_filter, ctf_transfer, ctf_zeros, phase_flip_filter, CtfParams};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let params = CtfParams::default();
    println!("alpha = {}, dz*lambda = {}, cs*lambda^3 = {}", params.alpha, params.dz_lambda, params.cs_lambda3);
    println!("{:>6}  {:>10}", "k", "h(k)");
    for i in 0..=10 {
        let k = 0.05 * i as f64;
        println!("{k:>6.3}  {:>10.5}", ctf_transfer(k, &params));
    }
    let zeros = ctf_zeros(&params, 0.5);
    println!("{} zeros below Nyquist, first at k = {:.7}", zeros.len(), zeros[0]);

    let filter = build_filter(32, 32, &params);
    let flip = phase_flip_filter(&filter);
    let negative = flip.response().iter().filter(|&&v| v < 0.0).count();
    println!("32x32 filter: max |h| = {:.4}, {negative} of 1024 frequencies flipped", filter.max_abs());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
