//! Workdir layout and content-digested stage manifests.
//!
//! ```text
//! corpus/     ingest, segment
//! datasets/   build-datasets
//! prompts/    gen-prompts, select-prompts
//! inference/  infer
//! eval/       evaluate, report
//! posttrain/  export-sft, export-dpo, gate-dpo
//! usage/      token-usage
//! ledger/     one token ledger per backend-using command
//! manifests/  one manifest per command
//! ```

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug)]
pub struct Workdir {
    root: PathBuf,
}

impl Workdir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.path(rel).is_file()
    }

    pub fn manifest_path(&self, command: &str) -> PathBuf {
        self.path(&format!("manifests/{command}.json"))
    }
}

/// What a command read and wrote, with SHA-256 digests. Paths of workdir
/// artifacts are workdir-relative; files outside it go in `external_inputs`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_digest: String,
    pub external_inputs: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// Records the inputs and outputs of one command run.
pub struct Stage<'a> {
    wd: &'a Workdir,
    manifest: Manifest,
}

impl<'a> Stage<'a> {
    pub fn new(wd: &'a Workdir, command: &str, config_digest: String) -> Self {
        Self { wd, manifest: Manifest { command: command.into(), config_digest, ..Manifest::default() } }
    }

    pub fn workdir(&self) -> &Workdir {
        self.wd
    }

    /// Reads a workdir artifact written by `producer`.
    pub fn read(&mut self, rel: &str, producer: &str) -> Result<String, CliError> {
        let path = self.wd.path(rel);
        if !path.is_file() {
            return Err(CliError::MissingArtifact { path: rel.into(), command: producer.into() });
        }
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        self.manifest.inputs.insert(rel.into(), sha256_hex(text.as_bytes()));
        Ok(text)
    }

    pub fn read_json<T: DeserializeOwned>(&mut self, rel: &str, producer: &str) -> Result<T, CliError> {
        let text = self.read(rel, producer)?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{rel}: {e}")))
    }

    pub fn read_jsonl<T: DeserializeOwned>(&mut self, rel: &str, producer: &str) -> Result<Vec<T>, CliError> {
        let text = self.read(rel, producer)?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::Data(format!("{rel}:{}: {e}", i + 1))))
            .collect()
    }

    /// Reads a file outside the workdir.
    pub fn read_external(&mut self, path: &Path) -> Result<String, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.manifest.external_inputs.insert(path.display().to_string(), sha256_hex(text.as_bytes()));
        Ok(text)
    }

    pub fn write(&mut self, rel: &str, content: &str) -> Result<(), CliError> {
        let path = self.wd.path(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
        self.manifest.outputs.insert(rel.into(), sha256_hex(content.as_bytes()));
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
        text.push('\n');
        self.write(rel, &text)
    }

    pub fn write_jsonl<T: Serialize>(&mut self, rel: &str, records: &[T]) -> Result<(), CliError> {
        self.write(rel, &promptner::posttrain::to_jsonl(records))
    }

    /// Writes `manifests/<command>.json`.
    pub fn finish(self) -> Result<Manifest, CliError> {
        let path = self.wd.manifest_path(&self.manifest.command);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(self.manifest)
    }
}

pub fn load_manifests(wd: &Workdir) -> Result<Vec<Manifest>, CliError> {
    let dir = wd.path("manifests");
    let Ok(entries) = fs::read_dir(&dir) else {
        return Ok(Vec::new());
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
        })
        .collect()
}

/// Checks that every manifest input matches the output digest recorded by
/// the command that produced it, and that every recorded output still has
/// its recorded content. Returns the mismatches; empty means the chain holds.
pub fn verify_chain(wd: &Workdir) -> Result<Vec<String>, CliError> {
    let manifests = load_manifests(wd)?;
    let mut produced: BTreeMap<&str, (&str, &str)> = BTreeMap::new();
    for m in &manifests {
        for (path, digest) in &m.outputs {
            produced.insert(path, (&m.command, digest));
        }
    }
    let mut problems = Vec::new();
    for m in &manifests {
        for (path, digest) in &m.inputs {
            match produced.get(path.as_str()) {
                None => problems.push(format!("{}: input {path} has no producing manifest", m.command)),
                Some((by, d)) if d != digest => {
                    problems.push(format!("{}: input {path} differs from the version written by {by}", m.command))
                }
                Some(_) => {}
            }
        }
        for (path, digest) in &m.outputs {
            match fs::read(wd.path(path)) {
                Ok(bytes) if sha256_hex(&bytes) == *digest => {}
                Ok(_) => problems.push(format!("{}: output {path} changed since it was written", m.command)),
                Err(_) => problems.push(format!("{}: output {path} is missing", m.command)),
            }
        }
    }
    Ok(problems)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let wd = Workdir::new(dir.path());
        let mut a = Stage::new(&wd, "first", "c".into());
        a.write("x/a.txt", "alpha\n").unwrap();
        a.finish().unwrap();
        let mut b = Stage::new(&wd, "second", "c".into());
        assert_eq!(b.read("x/a.txt", "first").unwrap(), "alpha\n");
        b.write("y/b.txt", "beta\n").unwrap();
        let m = b.finish().unwrap();
        assert_eq!(m.inputs["x/a.txt"], sha256_hex(b"alpha\n"));
        assert!(verify_chain(&wd).unwrap().is_empty());

        fs::write(wd.path("x/a.txt"), "changed\n").unwrap();
        let problems = verify_chain(&wd).unwrap();
        assert_eq!(problems.len(), 1, "{problems:?}");

        let mut a = Stage::new(&wd, "first", "c".into());
        a.write("x/a.txt", "changed\n").unwrap();
        a.finish().unwrap();
        let problems = verify_chain(&wd).unwrap();
        assert_eq!(problems, vec!["second: input x/a.txt differs from the version written by first"]);
    }

    #[test]
    fn missing_input_names_producer() {
        let dir = tempfile::tempdir().unwrap();
        let wd = Workdir::new(dir.path());
        let mut s = Stage::new(&wd, "infer", "c".into());
        let e = s.read("prompts/age.ensemble.json", "select-prompts").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert_eq!(e.to_string(), "missing prompts/age.ensemble.json; run `promptner select-prompts` first");
    }
}
