pub mod cluster;
pub mod eval;
pub mod gen;
pub mod infer_k;
pub mod train;
pub mod verify;

use std::path::{Path, PathBuf};

use ndarray::Array2;
use spherecc::data::{load_csv, Dataset, Split};
use spherecc::error::{Error, Result};

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub fn load_split(path: &Path) -> Result<Split> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::BadFormat {
        what: format!("split file {}: {e}", path.display()),
    })
}

pub fn save_split(split: &Split, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(split)?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

/// Loads the dataset and restricts it to the training rows when a split
/// file is given. Returns the working feature matrix together with the
/// matching labels, when the file carries them.
pub fn load_training_view(
    data: &Path,
    split: Option<&PathBuf>,
    has_labels: bool,
) -> Result<(Dataset, Option<Split>, Array2<f64>, Option<Vec<usize>>)> {
    let ds = load_csv(data, has_labels)?;
    let split = split.map(|p| load_split(p)).transpose()?;
    let (x, labels) = match &split {
        Some(s) => {
            let x = ds.rows(&s.train_idx);
            let labels = ds
                .labels
                .as_ref()
                .map(|l| s.train_idx.iter().map(|&i| l[i]).collect());
            (x, labels)
        }
        None => (ds.x.clone(), ds.labels.clone()),
    };
    Ok((ds, split, x, labels))
}

/// Writes `index,cluster` rows, the same shape `eval` reads back.
pub fn save_labels_csv(labels: &[usize], path: &Path) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "index,cluster")?;
    for (i, l) in labels.iter().enumerate() {
        writeln!(f, "{i},{l}")?;
    }
    f.flush()?;
    Ok(())
}
