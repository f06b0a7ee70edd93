// Central finite-difference checks of every gradient path on the micro model.

use ccinfer::adversarial::gradient_suite;
use ccinfer::neural::GradcheckConfig;

pub fn run_example() -> anyhow::Result<()> {
    let cfg = GradcheckConfig { per_tensor: Some(8), ..GradcheckConfig::default() };
    for report in gradient_suite(0, cfg)? {
        println!("{:<24} {:>5} coordinates  max rel error {:.2e}", report.label, report.checked(), report.max_rel_error());
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
