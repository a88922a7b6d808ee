use super::KbError;

pub const RESOURCE_PREFIX: &str = "http://dbpedia.org/resource/";

/// A SELECT query for one attribute term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparqlQuery {
    pub term: String,
    pub text: String,
}

/// `"stop sign"` → `"Stop_Sign"`. Terms may only contain lowercase ASCII
/// letters, digits, spaces and hyphens.
pub fn resource_name(term: &str) -> Result<String, KbError> {
    if let Some(bad) = term
        .chars()
        .find(|c| !(c.is_ascii_lowercase() || c.is_ascii_digit() || *c == ' ' || *c == '-'))
    {
        return Err(KbError::InvalidTerm { term: term.into(), reason: format!("character {bad:?} not allowed") });
    }
    let words: Vec<String> = term
        .split(' ')
        .filter(|w| !w.is_empty())
        .map(|w| {
            let mut chars = w.chars();
            let first = chars.next().expect("nonempty word");
            first.to_ascii_uppercase().to_string() + chars.as_str()
        })
        .collect();
    if words.is_empty() {
        return Err(KbError::InvalidTerm { term: term.into(), reason: "empty term".into() });
    }
    Ok(words.join("_"))
}

/// English `rdfs:comment` of the term's resource.
pub fn build_comment_query(term: &str) -> Result<SparqlQuery, KbError> {
    let resource = resource_name(term)?;
    let text = format!(
        "PREFIX rdfs: <http://www.w3.org/2000/01/rdf-schema#>\n\
         SELECT ?comment WHERE {{\n  \
         <{RESOURCE_PREFIX}{resource}> rdfs:comment ?comment .\n  \
         FILTER (lang(?comment) = \"en\")\n\
         }}\n"
    );
    Ok(SparqlQuery { term: term.into(), text })
}

/// The resource IRI's local name inside a query built by
/// [`build_comment_query`], if present.
pub fn queried_resource(text: &str) -> Option<&str> {
    let start = text.find(&format!("<{RESOURCE_PREFIX}"))? + RESOURCE_PREFIX.len() + 1;
    let len = text[start..].find('>')?;
    Some(&text[start..start + len])
}
