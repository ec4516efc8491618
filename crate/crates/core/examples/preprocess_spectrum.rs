//! Walks one raw replicate through smoothing, background removal,
//! despiking and phenylalanine normalization, printing what each step did.
//!
//! `cargo run --example preprocess_spectrum`

use serumscope::dataset::{generate_synthetic, SignalSpec, SynthConfig};
use serumscope::meta::MetadataSchema;
use serumscope::spectra::{
    correct_background, normalize_to_phenylalanine, remove_cosmic_rays, savitzky_golay, PreprocessConfig, Spectrum,
};

fn describe(step: &str, s: &Spectrum) {
    let y = s.intensities();
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let at = |x: f64| {
        let i = s.wavenumbers().iter().position(|&w| w >= x).unwrap_or(y.len() - 1);
        y[i]
    };
    println!("{step:<22} stage {:<20} range [{lo:>10.3}, {hi:>10.3}]  I(1003) {:>10.3}", s.stage().as_str(), at(1003.0));
}

fn main() -> serumscope::Result<()> {
    // A spike-prone synthetic replicate so the despiking step has work to do.
    let cfg = SynthConfig { n_patients: 4, spike_rate: 3.0, ..Default::default() };
    let cohort = generate_synthetic(&cfg, &MetadataSchema::compact(10), &SignalSpec::null(), 5)?;
    let raw = &cohort.spectra[0];
    let p = PreprocessConfig::default();

    describe("raw", raw);
    let smoothed = savitzky_golay(raw, p.sg_half_width, p.sg_order)?;
    describe("smoothed", &smoothed);
    let corrected = correct_background(&smoothed, p.bg_degree)?;
    describe("background removed", &corrected);
    let (despiked, replaced) = remove_cosmic_rays(&corrected, p.cosmic_threshold_k)?;
    describe("despiked", &despiked);
    let normalized = normalize_to_phenylalanine(&despiked, p.phe_window, p.phe_scale)?;
    describe("normalized", &normalized);

    let replaced_at: Vec<String> = replaced.iter().map(|&i| format!("{:.0}", raw.wavenumbers()[i])).collect();
    println!("\n{} points replaced as cosmic rays at cm^-1: {}", replaced.len(), replaced_at.join(", "));
    Ok(())
}
