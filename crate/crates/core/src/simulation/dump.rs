use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use flate2::write::GzEncoder;
use flate2::Compression;

use crate::simulation::PathBundle;
use crate::{Error, Result};

/// Writes one row per (path, node) with columns `path,t,z,s1,s2,x`, where `x`
/// is the wealth of strategy `strategy`. Compressed with gzip when `gzip` is set.
pub fn write_paths_csv(path: &Path, bundle: &PathBundle, strategy: usize, gzip: bool) -> Result<()> {
    if strategy >= bundle.x.len() {
        return Err(Error::InvalidArgument(format!(
            "strategy index {strategy} out of range ({} strategies)",
            bundle.x.len()
        )));
    }
    let file = File::create(path)?;
    if gzip {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        write_rows(&mut enc, bundle, strategy)?;
        enc.finish()?.flush()?;
    } else {
        let mut w = BufWriter::new(file);
        write_rows(&mut w, bundle, strategy)?;
        w.flush()?;
    }
    Ok(())
}

fn write_rows(w: &mut impl Write, bundle: &PathBundle, strategy: usize) -> std::io::Result<()> {
    writeln!(w, "path,t,z,s1,s2,x")?;
    for (k, zs) in bundle.z.iter().enumerate() {
        for (i, z) in zs.iter().enumerate() {
            writeln!(
                w,
                "{k},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                bundle.times[i], z, bundle.s1[k][i], bundle.s2[k][i], bundle.x[strategy][k][i]
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_model::MarketParams;
    use crate::simulation::{simulate, SimConfig, Strategy};
    use flate2::read::GzDecoder;
    use std::io::Read;

    #[test]
    fn plain_and_gzip_dumps_agree() {
        let p = MarketParams::new(-0.5, 0.5, 1.0, 1.0, 0.0, 1.0);
        let b = simulate(p, &[Strategy::zero()], &SimConfig::new(2, 3, 1.0, 0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let plain = dir.path().join("paths.csv");
        let gz = dir.path().join("paths.csv.gz");
        write_paths_csv(&plain, &b, 0, false).unwrap();
        write_paths_csv(&gz, &b, 0, true).unwrap();
        let text = std::fs::read_to_string(&plain).unwrap();
        let mut unzipped = String::new();
        GzDecoder::new(File::open(&gz).unwrap()).read_to_string(&mut unzipped).unwrap();
        assert_eq!(text, unzipped);
        assert_eq!(text.lines().count(), 1 + 2 * 4);
        assert!(write_paths_csv(&plain, &b, 1, false).is_err());
    }
}
