//! Reading tunables from a `/proc/sys`-style tree and emitting
//! `sysctl.conf` snippets and `ip link` commands.
//!
//! Nothing here writes to a live kernel. The root of the tree is always
//! passed in so tests can point it at a fixture directory.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use crate::error::{Error, Result};
use crate::model::{ByteTriple, NicConfig, Recommendation, TcpBufferConfig, Tunable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TunableKind {
    Triple,
    Scalar,
    Boolean,
}

/// A sysctl key, addressable by dotted name or by path under the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TunableKey {
    pub dotted_name: &'static str,
    pub kind: TunableKind,
}

impl TunableKey {
    pub const fn new(dotted_name: &'static str, kind: TunableKind) -> Self {
        Self { dotted_name, kind }
    }

    pub fn relative_path(&self) -> String {
        self.dotted_name.replace('.', "/")
    }

    pub fn for_tunable(tunable: Tunable) -> Option<TunableKey> {
        KEYS.into_iter().find(|k| k.dotted_name == tunable.name())
    }
}

pub const TCP_RMEM: TunableKey = TunableKey::new("net.ipv4.tcp_rmem", TunableKind::Triple);
pub const TCP_WMEM: TunableKey = TunableKey::new("net.ipv4.tcp_wmem", TunableKind::Triple);
pub const RMEM_MAX: TunableKey = TunableKey::new("net.core.rmem_max", TunableKind::Scalar);
pub const WMEM_MAX: TunableKey = TunableKey::new("net.core.wmem_max", TunableKind::Scalar);
pub const TCP_SACK: TunableKey = TunableKey::new("net.ipv4.tcp_sack", TunableKind::Boolean);
pub const TCP_MODERATE_RCVBUF: TunableKey =
    TunableKey::new("net.ipv4.tcp_moderate_rcvbuf", TunableKind::Boolean);

/// Keys read by [`read_snapshot`], in read order.
pub const KEYS: [TunableKey; 6] = [
    TCP_RMEM,
    TCP_WMEM,
    RMEM_MAX,
    WMEM_MAX,
    TCP_SACK,
    TCP_MODERATE_RCVBUF,
];

fn parse_error(input: &str, token: &str, reason: impl Into<String>) -> Error {
    Error::Parse {
        input: input.to_owned(),
        token: token.to_owned(),
        reason: reason.into(),
    }
}

fn parse_u64_token(input: &str, token: &str) -> Result<u64> {
    token
        .parse::<u64>()
        .map_err(|_| parse_error(input, token, "expected a non-negative integer"))
}

/// Parses a kernel byte triple. Fields may be separated by any run of spaces
/// or tabs.
pub fn parse_triple(raw: &str) -> Result<ByteTriple> {
    let fields: Vec<&str> = raw
        .trim_end_matches(['\n', '\r'])
        .split([' ', '\t'])
        .filter(|f| !f.is_empty())
        .collect();
    if fields.len() != 3 {
        let token = fields.get(3).copied().unwrap_or(raw.trim());
        return Err(parse_error(
            raw,
            token,
            format!("expected 3 fields, found {}", fields.len()),
        ));
    }
    let min = parse_u64_token(raw, fields[0])?;
    let default = parse_u64_token(raw, fields[1])?;
    let max = parse_u64_token(raw, fields[2])?;
    if min > default {
        return Err(parse_error(raw, fields[0], "min exceeds default"));
    }
    if default > max {
        return Err(parse_error(raw, fields[2], "max is below default"));
    }
    if min == 0 {
        return Err(parse_error(raw, fields[0], "buffer sizes must be > 0"));
    }
    Ok(ByteTriple { min, default, max })
}

pub fn parse_scalar(raw: &str) -> Result<u64> {
    let token = raw.trim();
    let value = parse_u64_token(raw, token)?;
    if value == 0 {
        return Err(parse_error(raw, token, "buffer sizes must be > 0"));
    }
    Ok(value)
}

pub fn parse_bool(raw: &str) -> Result<bool> {
    match raw.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(parse_error(raw, other, "expected 0 or 1")),
    }
}

/// Tunable values read from a tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TunableSnapshot {
    /// Raw file contents keyed by dotted name, trailing newline removed.
    pub raw: BTreeMap<&'static str, String>,
    pub config: TcpBufferConfig,
    pub source_root: PathBuf,
    pub read_time: SystemTime,
}

fn read_key(root: &Path, key: &TunableKey) -> Result<String> {
    let rel = key.relative_path();
    match fs::read_to_string(root.join(&rel)) {
        Ok(s) => Ok(s.trim_end_matches(['\n', '\r']).to_owned()),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Err(Error::MissingTunable(rel)),
        Err(e) => Err(Error::io(rel, e)),
    }
}

fn malformed(key: &TunableKey, content: &str, source: Error) -> Error {
    Error::MalformedTunable {
        path: key.relative_path(),
        content: content.to_owned(),
        source: Box::new(source),
    }
}

/// Reads the buffer-related tunables below `root` (normally `/proc/sys`).
pub fn read_snapshot(root: impl AsRef<Path>) -> Result<TunableSnapshot> {
    let root = root.as_ref();
    let mut raw = BTreeMap::new();
    for key in &KEYS {
        raw.insert(key.dotted_name, read_key(root, key)?);
    }
    let get = |key: &TunableKey| raw[key.dotted_name].as_str();
    let triple = |key: &TunableKey| parse_triple(get(key)).map_err(|e| malformed(key, get(key), e));
    let scalar = |key: &TunableKey| parse_scalar(get(key)).map_err(|e| malformed(key, get(key), e));
    let boolean = |key: &TunableKey| parse_bool(get(key)).map_err(|e| malformed(key, get(key), e));

    let config = TcpBufferConfig {
        rmem: triple(&TCP_RMEM)?,
        wmem: triple(&TCP_WMEM)?,
        rmem_max: scalar(&RMEM_MAX)?,
        wmem_max: scalar(&WMEM_MAX)?,
        sack_enabled: boolean(&TCP_SACK)?,
        moderate_rcvbuf: boolean(&TCP_MODERATE_RCVBUF)?,
    };
    Ok(TunableSnapshot {
        raw,
        config,
        source_root: root.to_path_buf(),
        read_time: SystemTime::now(),
    })
}

fn bool_value(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Values of every key in [`KEYS`] for `config`, sysctl.conf formatted.
fn config_values(config: &TcpBufferConfig) -> [(TunableKey, String); 6] {
    [
        (TCP_RMEM, config.rmem.to_string()),
        (TCP_WMEM, config.wmem.to_string()),
        (RMEM_MAX, config.rmem_max.to_string()),
        (WMEM_MAX, config.wmem_max.to_string()),
        (TCP_SACK, bool_value(config.sack_enabled).to_owned()),
        (
            TCP_MODERATE_RCVBUF,
            bool_value(config.moderate_rcvbuf).to_owned(),
        ),
    ]
}

/// Writes `config` as a kernel-style tree (tab-separated triples, trailing
/// newline) below `root`. Used to build fixtures.
pub fn write_tree(root: impl AsRef<Path>, config: &TcpBufferConfig) -> Result<()> {
    let root = root.as_ref();
    for (key, value) in config_values(config) {
        let path = root.join(key.relative_path());
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io_path(parent, e))?;
        }
        let value = match key.kind {
            TunableKind::Triple => value.replace(' ', "\t"),
            _ => value,
        };
        fs::write(&path, format!("{value}\n")).map_err(|e| Error::io_path(&path, e))?;
    }
    Ok(())
}

/// Emits a `sysctl.conf` snippet for the kernel tunables in `recs`.
///
/// Changed keys become `name = value` lines, unchanged keys are kept as
/// `# name = value (unchanged)` comments. Lines are sorted by dotted name.
/// Interface settings (MTU, txqueuelen) are not sysctls and are skipped; see
/// [`emit_link_commands`].
pub fn emit_sysctl_conf(recs: &[Recommendation]) -> String {
    let mut lines: Vec<(&'static str, String)> = recs
        .iter()
        .filter(|r| r.key.is_sysctl())
        .map(|r| {
            let name = r.key.name();
            let line = if r.changed {
                format!("{name} = {}", r.recommended)
            } else {
                format!("# {name} = {} (unchanged)", r.recommended)
            };
            (name, line)
        })
        .collect();
    lines.sort_by(|a, b| a.0.cmp(b.0));
    let mut out = String::new();
    for (_, line) in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Emits every buffer tunable of `config` in `sysctl.conf` form.
pub fn emit_config(config: &TcpBufferConfig) -> String {
    let mut values = config_values(config);
    values.sort_by(|a, b| a.0.dotted_name.cmp(b.0.dotted_name));
    values
        .iter()
        .map(|(key, value)| format!("{} = {value}\n", key.dotted_name))
        .collect()
}

/// Parses `sysctl.conf` text holding all six buffer tunables. Comments and
/// blank lines are ignored; unknown keys are an error.
pub fn parse_sysctl_conf(text: &str) -> Result<TcpBufferConfig> {
    let mut values: BTreeMap<&'static str, String> = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        let (name, value) = line
            .split_once('=')
            .ok_or_else(|| parse_error(line, line, "expected `name = value`"))?;
        let name = name.trim();
        let key = KEYS
            .iter()
            .find(|k| k.dotted_name == name)
            .ok_or_else(|| parse_error(line, name, "unknown tunable"))?;
        values.insert(key.dotted_name, value.trim().to_owned());
    }
    let get = |key: &TunableKey| {
        values
            .get(key.dotted_name)
            .map(String::as_str)
            .ok_or_else(|| Error::MissingTunable(key.dotted_name.to_owned()))
    };
    let config = TcpBufferConfig {
        rmem: parse_triple(get(&TCP_RMEM)?)?,
        wmem: parse_triple(get(&TCP_WMEM)?)?,
        rmem_max: parse_scalar(get(&RMEM_MAX)?)?,
        wmem_max: parse_scalar(get(&WMEM_MAX)?)?,
        sack_enabled: parse_bool(get(&TCP_SACK)?)?,
        moderate_rcvbuf: parse_bool(get(&TCP_MODERATE_RCVBUF)?)?,
    };
    Ok(config)
}

/// `ip link` commands that set the interface MTU and transmit queue length.
pub fn emit_link_commands(iface: &str, nic: &NicConfig) -> Result<[String; 2]> {
    if iface.is_empty() {
        return Err(Error::invalid("interface", "name must not be empty"));
    }
    Ok([
        format!("ip link set dev {iface} mtu {}", nic.mtu_bytes()),
        format!(
            "ip link set dev {iface} txqueuelen {}",
            nic.txqueuelen_packets()
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triple_parsing() {
        assert_eq!(
            parse_triple("4096\t16384\t87380").unwrap(),
            ByteTriple {
                min: 4096,
                default: 16384,
                max: 87380
            }
        );
        assert_eq!(
            parse_triple("4096 4096 4096\n").unwrap(),
            ByteTriple {
                min: 4096,
                default: 4096,
                max: 4096
            }
        );
        assert_eq!(
            parse_triple("  4096 \t  16384   87380 ").unwrap().max,
            87380
        );
    }

    #[test]
    fn triple_errors_name_the_token() {
        let token = |raw| match parse_triple(raw) {
            Err(Error::Parse { token, .. }) => token,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(token("4096 87380 16384"), "16384");
        assert_eq!(token("4096 x 87380"), "x");
        assert_eq!(token("4096 16384 87380 1"), "1");
        assert_eq!(token("4096 16384"), "4096 16384");
        assert_eq!(token("-1 16384 87380"), "-1");
    }

    #[test]
    fn booleans() {
        assert!(parse_bool("1\n").unwrap());
        assert!(!parse_bool("0").unwrap());
        assert!(parse_bool("2").is_err());
        assert!(parse_bool("yes").is_err());
    }

    #[test]
    fn key_paths() {
        assert_eq!(TCP_RMEM.relative_path(), "net/ipv4/tcp_rmem");
        assert_eq!(RMEM_MAX.relative_path(), "net/core/rmem_max");
        assert_eq!(TunableKey::for_tunable(Tunable::TcpSack), Some(TCP_SACK));
        assert_eq!(TunableKey::for_tunable(Tunable::Mtu), None);
    }

    #[test]
    fn sysctl_conf_lines() {
        let recs = vec![
            Recommendation::new(Tunable::TcpSack, "1", "1", "why"),
            Recommendation::new(
                Tunable::TcpRmem,
                "4096 16384 87380",
                "4096 87380 3952640",
                "why",
            ),
            Recommendation::new(Tunable::Mtu, 1500, 9000, "why"),
        ];
        assert_eq!(
            emit_sysctl_conf(&recs),
            "net.ipv4.tcp_rmem = 4096 87380 3952640\n# net.ipv4.tcp_sack = 1 (unchanged)\n"
        );
    }

    #[test]
    fn link_commands() {
        let nic = NicConfig::new(9000, 8000).unwrap();
        assert_eq!(
            emit_link_commands("eth0", &nic).unwrap(),
            [
                "ip link set dev eth0 mtu 9000",
                "ip link set dev eth0 txqueuelen 8000"
            ]
        );
        assert_eq!(
            emit_link_commands("eth0", &NicConfig::default()).unwrap(),
            [
                "ip link set dev eth0 mtu 1500",
                "ip link set dev eth0 txqueuelen 1000"
            ]
        );
        assert!(emit_link_commands("", &nic).is_err());
    }

    #[test]
    fn conf_parser_rejects_unknown_keys() {
        assert!(parse_sysctl_conf("net.ipv4.tcp_mem = 1 2 3\n").is_err());
        assert!(matches!(
            parse_sysctl_conf("# nothing\n"),
            Err(Error::MissingTunable(_))
        ));
    }
}
