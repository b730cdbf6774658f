use super::{Aspect, MosRecord};
use crate::error::Result;

const DESCRIPTION: &str = include_str!("../../templates/description.txt");
const ONEROUND_QUALITY: &str = include_str!("../../templates/oneround_quality.txt");
const ONEROUND_CORRESPONDENCE: &str = include_str!("../../templates/oneround_correspondence.txt");
const ONEROUND_AUTHENTICITY: &str = include_str!("../../templates/oneround_authenticity.txt");
const MULTI_QUALITY: [&str; 2] = [
    include_str!("../../templates/multiround_quality_analysis.txt"),
    include_str!("../../templates/multiround_quality_request.txt"),
];
const MULTI_CORRESPONDENCE: [&str; 2] = [
    include_str!("../../templates/multiround_correspondence_analysis.txt"),
    include_str!("../../templates/multiround_correspondence_request.txt"),
];
const MULTI_AUTHENTICITY: [&str; 2] = [
    include_str!("../../templates/multiround_authenticity_analysis.txt"),
    include_str!("../../templates/multiround_authenticity_request.txt"),
];

/// Single-pass `{name}` substitution. Unknown braces (the JSON example in the
/// description template) pass through, and substituted values are never
/// re-scanned.
pub(crate) fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let name = &after[..close];
            vars.iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (*v, close))
        });
        match hit {
            Some((value, close)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// The prompt used to obtain a reference description of an image from its
/// scores. Needs all three aspect scores.
pub fn render_description_prompt(record: &MosRecord) -> Result<String> {
    let q = record.score(Aspect::Quality)?.to_string();
    let a = record.score(Aspect::Correspondence)?.to_string();
    let au = record.score(Aspect::Authenticity)?.to_string();
    let (min, max) = (record.range.min.to_string(), record.range.max.to_string());
    Ok(fill(
        DESCRIPTION,
        &[
            ("prompt", &record.prompt),
            ("mos_q", &q),
            ("mos_a", &a),
            ("mos_au", &au),
            ("min", &min),
            ("max", &max),
        ],
    ))
}

/// Single-turn rating prompt (no intermediate description).
pub fn render_oneround(aspect: Aspect, prompt: &str) -> String {
    let template = match aspect {
        Aspect::Quality => ONEROUND_QUALITY,
        Aspect::Correspondence => ONEROUND_CORRESPONDENCE,
        Aspect::Authenticity => ONEROUND_AUTHENTICITY,
    };
    fill(template, &[("prompt", prompt)])
}

pub(crate) fn multiround_turns(aspect: Aspect, prompt: &str) -> (String, String) {
    let [analysis, request] = match aspect {
        Aspect::Quality => MULTI_QUALITY,
        Aspect::Correspondence => MULTI_CORRESPONDENCE,
        Aspect::Authenticity => MULTI_AUTHENTICITY,
    };
    (fill(analysis, &[("prompt", prompt)]), request.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::protocol::{AspectScores, MosRange};

    fn record(prompt: &str) -> MosRecord {
        MosRecord {
            id: "x".into(),
            prompt: prompt.into(),
            mos: AspectScores {
                quality: Some(3.5),
                correspondence: Some(2.0),
                authenticity: Some(4.25),
            },
            range: MosRange { min: 0.0, max: 5.0 },
        }
    }

    #[test]
    fn description_substitutes_everything() {
        let text = render_description_prompt(&record("a cat")).unwrap();
        assert!(text.starts_with("Analyze this image generated from the text prompt: 'a cat'."));
        assert!(text.contains("The quality score is 3.5, alignment score is 2, authenticity score is 4.25."));
        assert!(text.contains("Scores are between 0 and 5, with higher scores being better."));
        assert!(text.contains("Provide your assessment in JSON format"));
        assert!(text.contains("\n{\n  \"quality_explanation\""));
    }

    #[test]
    fn empty_prompt_renders_empty_quotes() {
        let text = render_description_prompt(&record("")).unwrap();
        assert!(text.contains("text prompt: ''."));
    }

    #[test]
    fn description_requires_all_aspects() {
        let mut r = record("p");
        r.mos.authenticity = None;
        assert!(matches!(
            render_description_prompt(&r),
            Err(Error::MissingAspectMos(Aspect::Authenticity))
        ));
    }

    #[test]
    fn placeholders_in_values_are_not_rescanned() {
        assert_eq!(fill("a {x} b {y}", &[("x", "{y}"), ("y", "1")]), "a {y} b 1");
        assert_eq!(fill("{ {x}", &[("x", "1")]), "{ 1");
    }

    #[test]
    fn oneround_anchor_phrases() {
        let q = render_oneround(Aspect::Quality, "p");
        assert!(q.contains("rate the image based on it's overall quality"));
        assert!(q.ends_with("Please just output one word from the list."));
        assert!(render_oneround(Aspect::Correspondence, "p").contains("correspondence with the prompt"));
        assert!(render_oneround(Aspect::Authenticity, "p").contains("rate the image based on its authenticity"));
    }
}
