//! The server config file: one `key = value` per line, `#` comments.
//!
//! ```text
//! listen = 127.0.0.1:8080
//! config_dir = /etc/ei/apps
//! state_root = /var/lib/ei
//! cors_origins = http://localhost:3000, https://ide.example.org
//! ```

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use ei_core::config::ConfigDefaults;

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    pub listen: SocketAddr,
    /// Directory scanned for app and example configs.
    pub config_dir: PathBuf,
    /// Where execution directories live.
    pub state_root: PathBuf,
    pub default_timeout_s: u64,
    pub max_output_bytes: u64,
    /// Finished executions are deleted this long after they were created.
    pub record_ttl: Duration,
    pub reap_interval: Duration,
    pub session_ttl: Duration,
    /// Key for signing session cookies. Random per process when unset,
    /// which invalidates sessions on restart.
    pub session_secret: Option<String>,
    pub cors_origins: Vec<String>,
    pub max_request_bytes: usize,
    /// Optional directory of static files served at `/` (the web client).
    pub static_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            config_dir: PathBuf::from("config"),
            state_root: PathBuf::from("ei-state"),
            default_timeout_s: 60,
            max_output_bytes: 10 * 1024 * 1024,
            record_ttl: Duration::from_secs(24 * 3600),
            reap_interval: Duration::from_secs(300),
            session_ttl: Duration::from_secs(24 * 3600),
            session_secret: None,
            cors_origins: Vec::new(),
            max_request_bytes: 64 * 1024 * 1024,
            static_dir: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for {key}: {message}")]
    BadValue { line: usize, key: String, message: String },
}

impl ServerConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = ServerConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            config.set(key.trim(), value.trim()).map_err(|e| match e {
                SetError::Unknown => ConfigError::UnknownKey { line, key: key.trim().to_owned() },
                SetError::Bad(message) => ConfigError::BadValue { line, key: key.trim().to_owned(), message },
            })?;
        }
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), SetError> {
        match key {
            "listen" => self.listen = parse(value)?,
            "config_dir" => self.config_dir = PathBuf::from(value),
            "state_root" => self.state_root = PathBuf::from(value),
            "default_timeout_s" => self.default_timeout_s = positive(value)?,
            "max_output_bytes" => self.max_output_bytes = positive(value)?,
            "record_ttl_s" => self.record_ttl = Duration::from_secs(parse(value)?),
            "reap_interval_s" => self.reap_interval = Duration::from_secs(positive(value)?),
            "session_ttl_s" => self.session_ttl = Duration::from_secs(positive(value)?),
            "session_secret" => self.session_secret = Some(value.to_owned()).filter(|s| !s.is_empty()),
            "cors_origins" => {
                self.cors_origins =
                    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned).collect()
            }
            "max_request_bytes" => self.max_request_bytes = positive(value)?,
            "static_dir" => self.static_dir = Some(PathBuf::from(value)).filter(|p| !p.as_os_str().is_empty()),
            _ => return Err(SetError::Unknown),
        }
        Ok(())
    }

    pub fn config_defaults(&self) -> ConfigDefaults {
        ConfigDefaults { timeout_s: self.default_timeout_s, max_output_bytes: self.max_output_bytes }
    }
}

enum SetError {
    Unknown,
    Bad(String),
}

fn parse<T: std::str::FromStr>(value: &str) -> Result<T, SetError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| SetError::Bad(e.to_string()))
}

fn positive<T: std::str::FromStr + Default + PartialOrd>(value: &str) -> Result<T, SetError>
where
    T::Err: std::fmt::Display,
{
    let v: T = parse(value)?;
    if v <= T::default() {
        return Err(SetError::Bad("must be positive".into()));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_file() {
        let c = ServerConfig::parse(
            "# ei server\nlisten = 0.0.0.0:9000\nconfig_dir=/etc/ei\n\nstate_root = /var/lib/ei\n\
             default_timeout_s = 5\nmax_output_bytes = 1024\nrecord_ttl_s = 0\nreap_interval_s = 10\n\
             session_ttl_s = 60\nsession_secret = s3cret=x\ncors_origins = http://a, http://b ,\n\
             max_request_bytes = 2048\nstatic_dir = /srv/ide\n",
        )
        .unwrap();
        assert_eq!(c.listen, "0.0.0.0:9000".parse().unwrap());
        assert_eq!(c.config_dir, PathBuf::from("/etc/ei"));
        assert_eq!(c.default_timeout_s, 5);
        assert_eq!(c.record_ttl, Duration::ZERO);
        assert_eq!(c.session_secret.as_deref(), Some("s3cret=x"));
        assert_eq!(c.cors_origins, ["http://a", "http://b"]);
        assert_eq!(c.max_request_bytes, 2048);
        assert_eq!(c.static_dir, Some(PathBuf::from("/srv/ide")));
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ServerConfig::parse("").unwrap(), ServerConfig::default());
    }

    #[test]
    fn errors_name_the_line() {
        assert!(matches!(ServerConfig::parse("listen"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(ServerConfig::parse("\nport = 1"), Err(ConfigError::UnknownKey { line: 2, .. })));
        assert!(matches!(
            ServerConfig::parse("default_timeout_s = 0"),
            Err(ConfigError::BadValue { line: 1, .. })
        ));
        assert!(matches!(ServerConfig::parse("listen = nowhere"), Err(ConfigError::BadValue { .. })));
    }
}
