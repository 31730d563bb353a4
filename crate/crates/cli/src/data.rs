use tuckercomp::io::{gen_mask, gen_synthetic, write_mask, write_tensor, SyntheticSpec};
use tuckercomp::QualityReport;

use crate::args::{MaskArgs, MetricsArgs, SynthArgs};
use crate::error::{CliError, CliResult};
use crate::output::{json_bytes, write_json};
use crate::run::{read_data, read_mask_file};

pub fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let spec = SyntheticSpec { dims: args.dims.clone(), num_bumps: args.bumps, width: args.width, seed: args.seed };
    let t = gen_synthetic(&spec)?;
    write_tensor(&t, &args.out).map_err(|e| CliError::at(&args.out, e))
}

pub fn cmd_mask(args: &MaskArgs) -> CliResult<()> {
    let dims = match (&args.like, &args.dims) {
        (Some(path), _) => read_data(path)?.dims().to_vec(),
        (None, Some(dims)) => dims.clone(),
        (None, None) => return Err(CliError::config("mask needs --like or --dims")),
    };
    let mask = gen_mask(&dims, args.sr, args.seed)?;
    write_mask(&mask, &args.out).map_err(|e| CliError::at(&args.out, e))
}

pub fn cmd_metrics(args: &MetricsArgs) -> CliResult<()> {
    let est = read_data(&args.est)?;
    let truth = read_data(&args.truth)?;
    let mask = read_mask_file(&args.mask)?;
    let report = QualityReport::evaluate(&est, &truth, &mask)?;
    if let Some(path) = &args.out {
        write_json(&report, path)?;
    }
    print!("{}", String::from_utf8(json_bytes(&report)?).expect("json is utf-8"));
    Ok(())
}
