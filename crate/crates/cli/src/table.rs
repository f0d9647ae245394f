/// Two-column summary printed under `--pretty`. A row with an empty value
/// starts a new section.
pub type Summary = Vec<(String, String)>;

pub fn render(rows: &Summary) -> String {
    let width = rows.iter().filter(|(_, v)| !v.is_empty()).map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        if v.is_empty() {
            out.push_str(&format!("\n{k}\n"));
        } else {
            out.push_str(&format!("  {k:<width$}  {v}\n"));
        }
    }
    out
}

pub fn row(k: impl Into<String>, v: impl ToString) -> (String, String) {
    (k.into(), v.to_string())
}

pub fn section(title: impl Into<String>) -> (String, String) {
    (title.into(), String::new())
}
