use std::fs::File;
use std::io::{BufWriter, Write};

use simon_learn::oracle::{
    count_mapping_tables, count_oracles_per_secret, enumerate_canonical_oracles,
};
use simon_learn::{BitString, TrainingSet};

use crate::output::{out_dir, Meta};
use crate::{CliError, RunConfig};

/// Writes every canonical oracle for `s` (or for all nonzero secrets) to
/// `oracles.jsonl` and checks the counts against the closed forms.
pub fn cmd_enumerate(
    cfg: &RunConfig,
    s: Option<BitString>,
    w: &mut dyn Write,
) -> Result<(), CliError> {
    let n = cfg.n;
    let secrets = match s {
        Some(s) if s.width() != n || s.is_zero() => {
            return Err(CliError::Usage(format!(
                "secret {s} must be a nonzero {n}-bit string"
            )))
        }
        Some(s) => vec![s],
        None => TrainingSet::all_secrets(n),
    };
    let per = count_oracles_per_secret(n)?;
    // Fail on capacity before touching the output directory.
    let _ = enumerate_canonical_oracles(n, secrets[0])?;

    let dir = out_dir(cfg)?;
    let meta = Meta::new("enumerate", cfg, "none");
    let mut file = BufWriter::new(File::create(dir.join("oracles.jsonl"))?);
    writeln!(file, "{}", line(&serde_json::json!({ "meta": meta })))?;

    let mut mismatches = Vec::new();
    let mut total = 0u128;
    for &s in &secrets {
        let mut count = 0u128;
        for f in enumerate_canonical_oracles(n, s)? {
            writeln!(file, "{}", line(&f))?;
            count += 1;
        }
        let ok = count == per;
        writeln!(
            w,
            "s={s} tables={count} expected={per} {}",
            if ok { "OK" } else { "MISMATCH" }
        )?;
        if !ok {
            mismatches.push(format!("s={s}"));
        }
        total += count;
    }
    file.flush()?;
    let expected = if s.is_some() {
        per
    } else {
        count_mapping_tables(n)?
    };
    let ok = total == expected;
    writeln!(
        w,
        "total={total} expected={expected} {}",
        if ok { "OK" } else { "MISMATCH" }
    )?;
    if !ok {
        mismatches.push("total".into());
    }
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "oracle counts: {}",
            mismatches.join(", ")
        )))
    }
}

fn line<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}
