//! Python execution in a subprocess. The sandbox directory is the only
//! extra entry on the module path, so a missing package surfaces as an
//! environment failure the rescuer can repair through an [`Installer`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use regex::Regex;
use serde_json::{Map, Value};

use super::{ArgKind, ArgSpec, Constraint, ToolFailure, ToolHandler, ToolOutput, ToolSpec};

const DEFAULT_TIMEOUT: Duration = Duration::from_secs(20);

pub struct CodeExecTool {
    python: String,
    sandbox: PathBuf,
    timeout: Duration,
}

impl CodeExecTool {
    pub fn new(sandbox: impl Into<PathBuf>) -> Self {
        CodeExecTool { python: "python3".into(), sandbox: sandbox.into(), timeout: DEFAULT_TIMEOUT }
    }

    pub fn with_python(mut self, python: impl Into<String>) -> Self {
        self.python = python.into();
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn sandbox(&self) -> &PathBuf {
        &self.sandbox
    }

    fn run(&self, code: &str) -> Result<(bool, String, String), ToolFailure> {
        fs::create_dir_all(&self.sandbox)
            .map_err(|e| ToolFailure::environment(format!("sandbox {}: {e}", self.sandbox.display())))?;
        let mut child = Command::new(&self.python)
            .arg("-c")
            .arg(code)
            .current_dir(&self.sandbox)
            .env("PYTHONPATH", &self.sandbox)
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .env_remove("PYTHONHOME")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| ToolFailure::environment(format!("cannot start {}: {e}", self.python)))?;
        let mut out_pipe = child.stdout.take().expect("piped");
        let mut err_pipe = child.stderr.take().expect("piped");
        let out_reader = thread::spawn(move || {
            let mut s = String::new();
            let _ = out_pipe.read_to_string(&mut s);
            s
        });
        let err_reader = thread::spawn(move || {
            let mut s = String::new();
            let _ = err_pipe.read_to_string(&mut s);
            s
        });
        let deadline = Instant::now() + self.timeout;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(ToolFailure::environment(format!("code ran longer than {:?}", self.timeout)));
                }
                Ok(None) => thread::sleep(Duration::from_millis(5)),
                Err(e) => return Err(ToolFailure::environment(e.to_string())),
            }
        };
        let stdout = out_reader.join().unwrap_or_default();
        let stderr = err_reader.join().unwrap_or_default();
        Ok((status.success(), stdout, stderr))
    }
}

/// The module name from a `ModuleNotFoundError` traceback.
pub fn missing_module(stderr: &str) -> Option<String> {
    let re = Regex::new(r"ModuleNotFoundError: No module named '([A-Za-z0-9_.]+)'").expect("static regex");
    re.captures(stderr).map(|c| c[1].split('.').next().unwrap_or_default().to_string())
}

impl ToolHandler for CodeExecTool {
    fn spec(&self) -> ToolSpec {
        ToolSpec {
            name: "code_exec".into(),
            description: "Runs a short Python program and returns what it prints.".into(),
            args: vec![ArgSpec::new("code", ArgKind::Text, true, Constraint::NonEmpty, "Python source")],
        }
    }

    fn call(&self, args: &Map<String, Value>) -> Result<ToolOutput, ToolFailure> {
        let code = args["code"].as_str().unwrap_or_default();
        let (ok, stdout, stderr) = self.run(code)?;
        if ok {
            return Ok(ToolOutput { content: stdout.trim_end().to_string(), artifacts: Vec::new() });
        }
        let last = stderr.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("exited with an error");
        if let Some(module) = missing_module(&stderr) {
            let mut f = ToolFailure::environment(format!("module {module} not found"));
            f.missing = Some(module);
            return Err(f);
        }
        Err(ToolFailure::bad_args(last.trim().to_string()))
    }
}

/// Repairs the runtime environment by installing one package.
pub trait Installer: Send + Sync {
    fn install(&self, package: &str) -> Result<String, String>;
}

/// Runs a configured command with the package name appended, for example
/// `pip install --target <sandbox>`. Packages outside the allowlist are
/// refused.
pub struct CommandInstaller {
    program: String,
    args: Vec<String>,
    allowlist: BTreeSet<String>,
}

impl CommandInstaller {
    pub fn new(program: impl Into<String>, args: Vec<String>, allowlist: impl IntoIterator<Item = String>) -> Self {
        CommandInstaller { program: program.into(), args, allowlist: allowlist.into_iter().collect() }
    }

    pub fn pip_target(sandbox: &std::path::Path, allowlist: impl IntoIterator<Item = String>) -> Self {
        CommandInstaller::new(
            "python3",
            vec![
                "-m".into(),
                "pip".into(),
                "install".into(),
                "--quiet".into(),
                "--target".into(),
                sandbox.to_string_lossy().into_owned(),
            ],
            allowlist,
        )
    }
}

impl Installer for CommandInstaller {
    fn install(&self, package: &str) -> Result<String, String> {
        if !self.allowlist.contains(package) {
            return Err(format!("{package} is not on the install allowlist"));
        }
        let out = Command::new(&self.program)
            .args(&self.args)
            .arg(package)
            .stdin(Stdio::null())
            .output()
            .map_err(|e| format!("cannot run {}: {e}", self.program))?;
        if out.status.success() {
            Ok(format!("installed {package}"))
        } else {
            Err(String::from_utf8_lossy(&out.stderr).trim().to_string())
        }
    }
}

/// Offline installer: "installing" a package writes its module source into
/// the sandbox directory. Its allowlist is the set of known modules.
pub struct ModuleInstaller {
    sandbox: PathBuf,
    modules: BTreeMap<String, String>,
}

impl ModuleInstaller {
    pub fn new(sandbox: impl Into<PathBuf>, modules: BTreeMap<String, String>) -> Self {
        ModuleInstaller { sandbox: sandbox.into(), modules }
    }
}

impl Installer for ModuleInstaller {
    fn install(&self, package: &str) -> Result<String, String> {
        let source = self.modules.get(package).ok_or_else(|| format!("{package} is not on the install allowlist"))?;
        fs::create_dir_all(&self.sandbox).map_err(|e| e.to_string())?;
        fs::write(self.sandbox.join(format!("{package}.py")), source).map_err(|e| e.to_string())?;
        Ok(format!("installed {package}"))
    }
}
