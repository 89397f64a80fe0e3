macro_rules! example {
    ($module:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(ctf_curve, "ctf_curve.rs");
example!(projector_adjoint, "projector_adjoint.rs");
example!(prior_potential, "prior_potential.rs");
example!(simulate_dataset, "simulate_dataset.rs");
example!(mbir_reconstruct, "mbir_reconstruct.rs");
example!(pr_baseline, "pr_baseline.rs");
example!(mrc_roundtrip, "mrc_roundtrip.rs");
example!(table1_sweep, "table1_sweep.rs");

#[test]
fn ctf_curve_runs() {
    ctf_curve::run_example().unwrap();
}

#[test]
fn projector_adjoint_runs() {
    projector_adjoint::run_example().unwrap();
}

#[test]
fn prior_potential_runs() {
    prior_potential::run_example().unwrap();
}

#[test]
fn simulate_dataset_runs() {
    simulate_dataset::run_example().unwrap();
}

#[test]
fn mbir_reconstruct_runs() {
    mbir_reconstruct::run_example().unwrap();
}

#[test]
fn pr_baseline_runs() {
    pr_baseline::run_example().unwrap();
}

#[test]
fn mrc_roundtrip_runs() {
    mrc_roundtrip::run_example().unwrap();
}

#[test]
fn reduced_sweep_runs() {
    table1_sweep::run_example().unwrap();
}
