use thiserror::Error;
use url::{Host, Url};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("unparseable URL `{0}`")]
    Unparseable(String),
    #[error("URL `{0}` has no host")]
    NoHost(String),
}

/// Registered domain of a URL: lowercased host without scheme, port, path,
/// query or a leading `www.`, reduced with the public-suffix list compiled
/// into the `psl` crate. Bare hosts like `example.com/page` are accepted.
/// Nothing is resolved over the network.
pub fn extract_domain(raw: &str) -> Result<String, DomainError> {
    let trimmed = raw.trim();
    let url = match Url::parse(trimmed) {
        Ok(u) => u,
        Err(url::ParseError::RelativeUrlWithoutBase)
            if !trimmed.is_empty()
                && !trimmed.contains(char::is_whitespace)
                && trimmed.contains('.') =>
        {
            Url::parse(&format!("http://{trimmed}"))
                .map_err(|_| DomainError::Unparseable(raw.to_string()))?
        }
        Err(_) => return Err(DomainError::Unparseable(raw.to_string())),
    };
    let host = match url.host() {
        Some(Host::Domain(d)) => d.trim_end_matches('.').to_ascii_lowercase(),
        Some(Host::Ipv4(ip)) => return Ok(ip.to_string()),
        Some(Host::Ipv6(ip)) => return Ok(ip.to_string()),
        None => return Err(DomainError::NoHost(raw.to_string())),
    };
    if host.is_empty() {
        return Err(DomainError::NoHost(raw.to_string()));
    }
    let host = host.strip_prefix("www.").unwrap_or(&host);
    Ok(psl::domain_str(host).unwrap_or(host).to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes() {
        assert_eq!(extract_domain("https://www.Example.com/a?b=1").unwrap(), "example.com");
        assert_eq!(extract_domain("HTTP://EXAMPLE.com:8080/x#y").unwrap(), "example.com");
        assert_eq!(extract_domain("example.com/path").unwrap(), "example.com");
        assert_eq!(extract_domain("  https://example.com.  ").unwrap(), "example.com");
    }

    #[test]
    fn reduces_to_registered_domain() {
        assert_eq!(extract_domain("http://news.bbc.co.uk/x").unwrap(), "bbc.co.uk");
        assert_eq!(extract_domain("https://edition.cnn.com/").unwrap(), "cnn.com");
        assert_eq!(extract_domain("https://foo.blogspot.com/p").unwrap(), "foo.blogspot.com");
        assert_eq!(extract_domain("https://www.abc.net.au/news").unwrap(), "abc.net.au");
    }

    #[test]
    fn failures() {
        assert!(matches!(extract_domain("not a url"), Err(DomainError::Unparseable(_))));
        assert!(extract_domain("").is_err());
        assert!(extract_domain("mailto:someone").is_err());
        assert!(extract_domain("https://").is_err());
    }

    #[test]
    fn ip_hosts_pass_through() {
        assert_eq!(extract_domain("http://127.0.0.1:80/x").unwrap(), "127.0.0.1");
    }
}
