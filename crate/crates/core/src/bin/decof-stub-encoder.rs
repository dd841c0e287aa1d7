//! Stub external encoder: reads `DCRQ` requests on stdin, answers `DCRS`.
//!
//! Usage: `decof-stub-encoder [--dim D] [--seed S]`

use std::io::{BufReader, BufWriter};
use std::process::ExitCode;

use decof_core::encoder::stub::serve;

fn parse_args() -> Result<(usize, u64), String> {
    let mut dim = 64usize;
    let mut seed = 0u64;
    let mut args = std::env::args().skip(1);
    while let Some(flag) = args.next() {
        let value = args.next().ok_or_else(|| format!("missing value for {flag}"))?;
        match flag.as_str() {
            "--dim" => dim = value.parse().map_err(|e| format!("--dim: {e}"))?,
            "--seed" => seed = value.parse().map_err(|e| format!("--seed: {e}"))?,
            _ => return Err(format!("unknown flag {flag}")),
        }
    }
    if dim == 0 {
        return Err("--dim must be ≥ 1".into());
    }
    Ok((dim, seed))
}

fn main() -> ExitCode {
    let (dim, seed) = match parse_args() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("decof-stub-encoder: {e}");
            return ExitCode::from(2);
        }
    };
    let mut input = BufReader::new(std::io::stdin().lock());
    let mut output = BufWriter::new(std::io::stdout().lock());
    match serve(&mut input, &mut output, dim, seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("decof-stub-encoder: {e}");
            ExitCode::from(3)
        }
    }
}
