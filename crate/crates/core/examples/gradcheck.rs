//! Runs the finite-difference gradient suite in double and single precision.
//!
//! cargo run --release --example gradcheck

use recursivemix::gradcheck::{run_suite, SuiteOptions, DEFAULT_THRESHOLD};

fn main() -> recursivemix::Result<()> {
    let f64_report = run_suite::<f64>(SuiteOptions::for_precision::<f64>())?;
    print!("{}", f64_report.render(Some(DEFAULT_THRESHOLD)));
    let f32_report = run_suite::<f32>(SuiteOptions::for_precision::<f32>())?;
    print!("{}", f32_report.render(None));
    println!(
        "max error: f64 {:.3e}, f32 {:.3e}",
        f64_report.max_error(),
        f32_report.max_error()
    );
    Ok(())
}
