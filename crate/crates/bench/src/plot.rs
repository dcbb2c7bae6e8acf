//! Plot-ready downsampling of trace CSVs.

/// Indices of at most `max_rows` rows out of `n`, evenly spaced, always
/// keeping the first and last.
pub fn downsample_indices(n: usize, max_rows: usize) -> Vec<usize> {
    if n <= max_rows || max_rows == 0 {
        return (0..n).collect();
    }
    if max_rows == 1 {
        return vec![n - 1];
    }
    let mut idx: Vec<usize> = (0..max_rows)
        .map(|k| ((k as f64) * (n - 1) as f64 / (max_rows - 1) as f64).round() as usize)
        .collect();
    idx.dedup();
    idx
}

/// Keeps the header and an evenly spaced subset of data rows.
pub fn downsample_csv(text: &str, max_rows: usize) -> String {
    let mut lines = text.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let rows: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    let mut out = String::with_capacity(text.len().min(64 * (max_rows + 1)));
    out.push_str(header);
    out.push('\n');
    for i in downsample_indices(rows.len(), max_rows) {
        out.push_str(rows[i]);
        out.push('\n');
    }
    out
}
