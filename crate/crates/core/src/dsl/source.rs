//! Loading `.model` files and resolving `include` directives.

use std::collections::HashMap;
use std::path::{Component, Path, PathBuf};

use super::ast::ModelAst;
use super::error::DslError;
use super::parser::parse;

/// Where model text comes from.
pub trait SourceLoader {
    fn load(&self, path: &Path) -> Result<String, DslError>;
}

/// Reads from the filesystem.
#[derive(Debug, Clone, Copy, Default)]
pub struct FsLoader;

impl SourceLoader for FsLoader {
    fn load(&self, path: &Path) -> Result<String, DslError> {
        std::fs::read_to_string(path).map_err(|e| DslError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// In-memory files keyed by normalized path.
#[derive(Debug, Clone, Default)]
pub struct MemoryLoader {
    files: HashMap<PathBuf, String>,
}

impl MemoryLoader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, path: impl AsRef<Path>, text: impl Into<String>) -> Self {
        self.insert(path, text);
        self
    }

    pub fn insert(&mut self, path: impl AsRef<Path>, text: impl Into<String>) {
        self.files.insert(normalize(path.as_ref()), text.into());
    }
}

impl SourceLoader for MemoryLoader {
    fn load(&self, path: &Path) -> Result<String, DslError> {
        self.files.get(&normalize(path)).cloned().ok_or_else(|| DslError::Io {
            path: path.to_path_buf(),
            message: "no such file".into(),
        })
    }
}

/// Lexically removes `.` and `..` components.
pub fn normalize(path: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push("..");
                }
            }
            other => out.push(other.as_os_str()),
        }
    }
    out
}

/// A parsed file of a model.
#[derive(Debug, Clone)]
pub struct SourceFile {
    pub path: PathBuf,
    pub text: String,
    pub ast: ModelAst,
}

/// The file at `path` and everything it includes, transitively. Included
/// files come before their includer; each file appears once.
pub fn file_set(loader: &dyn SourceLoader, path: &Path) -> Result<Vec<SourceFile>, DslError> {
    let mut out = Vec::new();
    let mut stack = Vec::new();
    visit(loader, &normalize(path), &mut stack, &mut out)?;
    Ok(out)
}

fn visit(
    loader: &dyn SourceLoader,
    path: &Path,
    stack: &mut Vec<PathBuf>,
    out: &mut Vec<SourceFile>,
) -> Result<(), DslError> {
    if stack.iter().any(|p| p == path) {
        return Err(DslError::IncludeCycle { path: path.to_path_buf() });
    }
    if out.iter().any(|f| f.path == path) {
        return Ok(());
    }
    let text = loader.load(path)?;
    let ast = parse(&text).map_err(|source| DslError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    stack.push(path.to_path_buf());
    let dir = path.parent().unwrap_or(Path::new(""));
    for inc in ast.includes() {
        visit(loader, &normalize(&dir.join(inc)), stack, out)?;
    }
    stack.pop();
    out.push(SourceFile {
        path: path.to_path_buf(),
        text,
        ast,
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn includes_come_first_and_once() {
        let loader = MemoryLoader::new()
            .with("m/a.model", "include \"lib/b.model\"; include \"lib/c.model\";")
            .with("m/lib/b.model", "include \"c.model\";")
            .with("m/lib/c.model", "");
        let files = file_set(&loader, Path::new("m/a.model")).unwrap();
        let names: Vec<_> = files.iter().map(|f| f.path.to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["m/lib/c.model", "m/lib/b.model", "m/a.model"]);
    }

    #[test]
    fn include_cycles_are_rejected() {
        let loader = MemoryLoader::new()
            .with("a.model", "include \"b.model\";")
            .with("b.model", "include \"./a.model\";");
        assert!(matches!(
            file_set(&loader, Path::new("a.model")),
            Err(DslError::IncludeCycle { .. })
        ));
    }

    #[test]
    fn missing_include_is_an_io_error() {
        let loader = MemoryLoader::new().with("a.model", "include \"nope.model\";");
        assert!(matches!(file_set(&loader, Path::new("a.model")), Err(DslError::Io { .. })));
    }
}
