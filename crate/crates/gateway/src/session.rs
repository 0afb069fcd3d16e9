//! Session identity carried in a signed cookie.
//!
//! A token is `<id>.<issued>.<mac>`: 128 random bits in hex, the issue time
//! in Unix seconds, and an HMAC-SHA256 over the first two parts. The server
//! keeps no session table; any token with a valid MAC that has not expired
//! is accepted as is. The whole token is what tools see as `_ei_sessionid`.

use std::time::{Duration, SystemTime, UNIX_EPOCH};

use hmac::{Hmac, Mac};
use rand::RngCore;
use sha2::Sha256;

pub const COOKIE_NAME: &str = "ei_session";

type HmacSha256 = Hmac<Sha256>;

#[derive(Clone)]
pub struct SessionKeys {
    secret: Vec<u8>,
    ttl: Duration,
}

impl std::fmt::Debug for SessionKeys {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionKeys").field("ttl", &self.ttl).finish_non_exhaustive()
    }
}

/// The session of one request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub token: String,
    /// Set when the token was minted for this request and must be sent back
    /// in a `Set-Cookie` header.
    pub minted: bool,
}

impl SessionKeys {
    pub fn new(secret: impl Into<Vec<u8>>, ttl: Duration) -> Self {
        SessionKeys { secret: secret.into(), ttl }
    }

    pub fn random(ttl: Duration) -> Self {
        let mut secret = vec![0u8; 32];
        rand::thread_rng().fill_bytes(&mut secret);
        SessionKeys { secret, ttl }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    fn mac(&self, payload: &str) -> String {
        let mut mac = HmacSha256::new_from_slice(&self.secret).expect("HMAC takes keys of any length");
        mac.update(payload.as_bytes());
        hex::encode(mac.finalize().into_bytes())
    }

    pub fn mint(&self, now: SystemTime) -> String {
        let mut id = [0u8; 16];
        rand::thread_rng().fill_bytes(&mut id);
        let issued = now.duration_since(UNIX_EPOCH).unwrap_or_default().as_secs();
        let payload = format!("{}.{issued}", hex::encode(id));
        let mac = self.mac(&payload);
        format!("{payload}.{mac}")
    }

    pub fn verify(&self, token: &str, now: SystemTime) -> bool {
        let Some((payload, mac)) = token.rsplit_once('.') else { return false };
        let Some((id, issued)) = payload.split_once('.') else { return false };
        if id.len() != 32 || !id.bytes().all(|b| b.is_ascii_hexdigit()) {
            return false;
        }
        let Ok(issued) = issued.parse::<u64>() else { return false };
        let Ok(mac_bytes) = hex::decode(mac) else { return false };
        let mut check = HmacSha256::new_from_slice(&self.secret).expect("HMAC takes keys of any length");
        check.update(payload.as_bytes());
        if check.verify_slice(&mac_bytes).is_err() {
            return false;
        }
        let now = now.duration_since(UNIX_EPOCH).unwrap_or_default().as_secs();
        issued <= now.saturating_add(60) && now.saturating_sub(issued) < self.ttl.as_secs()
    }

    /// Reuse the cookie's token when it is valid, otherwise mint a new one.
    pub fn issue(&self, cookie_header: Option<&str>, now: SystemTime) -> Session {
        if let Some(token) = cookie_header.and_then(|h| cookie_value(h, COOKIE_NAME)) {
            if self.verify(token, now) {
                return Session { token: token.to_owned(), minted: false };
            }
        }
        Session { token: self.mint(now), minted: true }
    }

    pub fn set_cookie(&self, token: &str) -> String {
        format!("{COOKIE_NAME}={token}; Path=/; Max-Age={}; HttpOnly; SameSite=Lax", self.ttl.as_secs())
    }
}

/// Value of cookie `name` in a `Cookie` request header.
pub fn cookie_value<'a>(header: &'a str, name: &str) -> Option<&'a str> {
    header.split(';').find_map(|pair| {
        let (k, v) = pair.trim().split_once('=')?;
        (k.trim() == name).then(|| v.trim().trim_matches('"'))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn keys() -> SessionKeys {
        SessionKeys::new("secret", Duration::from_secs(3600))
    }

    #[test]
    fn cookie_round_trip() {
        let now = SystemTime::now();
        let first = keys().issue(None, now);
        assert!(first.minted);
        let header = format!("theme=dark; {COOKIE_NAME}={}; x=1", first.token);
        let again = keys().issue(Some(&header), now);
        assert_eq!(again, Session { token: first.token, minted: false });
    }

    #[test]
    fn rejects_forged_expired_and_foreign_tokens() {
        let now = SystemTime::now();
        let token = keys().mint(now);
        assert!(keys().verify(&token, now));
        assert!(!keys().verify(&token, now + Duration::from_secs(3601)));
        assert!(!SessionKeys::new("other", Duration::from_secs(3600)).verify(&token, now));
        let mut forged = token.clone();
        forged.replace_range(0..1, if token.starts_with('0') { "1" } else { "0" });
        assert!(!keys().verify(&forged, now));
        for junk in ["", "a.b.c", "x", "..", &format!("{token}0")] {
            assert!(!keys().verify(junk, now), "{junk}");
        }
    }

    #[test]
    fn ten_thousand_distinct_tokens() {
        let now = SystemTime::now();
        let k = keys();
        let tokens: HashSet<String> = (0..10_000).map(|_| k.issue(None, now).token).collect();
        assert_eq!(tokens.len(), 10_000);
    }

    #[test]
    fn cookie_parsing() {
        assert_eq!(cookie_value("a=1; ei_session=tok", "ei_session"), Some("tok"));
        assert_eq!(cookie_value("ei_session=\"tok\"", "ei_session"), Some("tok"));
        assert_eq!(cookie_value("xei_session=tok", "ei_session"), None);
        assert_eq!(cookie_value("", "ei_session"), None);
    }
}
