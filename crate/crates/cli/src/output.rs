use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// CSV with `#` comment lines, the first of which carries the config hash.
pub struct Csv {
    head: String,
    columns: String,
    rows: String,
}

impl Csv {
    pub fn new(hash: &str, columns: &[&str]) -> Self {
        Self {
            head: format!("# config_hash={hash}\n"),
            columns: columns.join(","),
            rows: String::new(),
        }
    }

    pub fn comment(&mut self, text: &str) {
        let _ = writeln!(self.head, "# {text}");
    }

    pub fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.rows, "{}", cells.join(","));
    }

    pub fn text(&self) -> String {
        format!("{}{}\n{}", self.head, self.columns, self.rows)
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.text())
    }
}

#[macro_export]
macro_rules! cells {
    ($($x:expr),* $(,)?) => { vec![$($x.to_string()),*] };
}
