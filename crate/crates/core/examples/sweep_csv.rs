//! A precision sweep over the three CNNs, written as CSV to stdout.

use apsim::mapper::HardwareConfig;
use apsim::sim::{sweep, write_csv, SweepSpec};
use apsim::tech::{ClockProfile, InterconnectProfile};

fn main() -> apsim::Result<()> {
    let mut spec = SweepSpec::default();
    spec.set_axis("model=alexnet,vgg16,resnet50")?;
    spec.set_axis("precision=2..8")?;
    let rows = sweep(&spec, &HardwareConfig::lr_default(), &InterconnectProfile::default(), &ClockProfile::default())?;
    write_csv(std::io::stdout().lock(), &rows)
}
