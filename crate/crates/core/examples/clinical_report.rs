//! Renders the built-in demo patient in both report formats and reads the
//! itemized form back.
//!
//! `cargo run --example clinical_report`

use serumscope::annotate::Libraries;
use serumscope::report::demo::demo_report;
use serumscope::report::{parse_structured, render_structured, render_text};

fn main() -> serumscope::Result<()> {
    let libs = Libraries::builtin();
    let report = demo_report(&libs)?;

    println!("{}", render_text(&report));
    let itemized = render_structured(&report);
    println!("{itemized}");

    let parsed = parse_structured(&itemized)?;
    println!(
        "parsed back: tier {:?}, polyp {:?}, CRC {:?}, false positives {:?}",
        parsed.tier, parsed.polyp_tally, parsed.crc_tally, parsed.false_positive_names
    );
    Ok(())
}
