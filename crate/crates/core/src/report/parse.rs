use super::RiskTier;
use crate::error::{Error, Result};

/// Decisions and tallies recovered from the itemized report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedReport {
    pub patient_id: String,
    /// `None` when the model was unavailable.
    pub polyp_positive: Option<bool>,
    pub crc_positive: Option<bool>,
    pub tier: Option<RiskTier>,
    /// (matched, library entries); `None` when unavailable.
    pub polyp_tally: Option<(usize, usize)>,
    pub crc_tally: Option<(usize, usize)>,
    pub false_positive_count: usize,
    pub false_positive_names: Vec<String>,
    pub medications: Vec<String>,
    pub metadata_flagged_positive: usize,
    pub positives: usize,
    pub features_evaluated: usize,
    pub spectral_flagged: Vec<String>,
}

fn bad(detail: impl Into<String>) -> Error {
    Error::Format { what: "structured report", detail: detail.into() }
}

fn list(s: &str) -> Vec<String> {
    if s.trim() == "none" {
        Vec::new()
    } else {
        s.split(", ").map(|x| x.trim().to_string()).collect()
    }
}

fn decision(s: &str) -> Result<Option<bool>> {
    if s.starts_with("Recommended colonoscopy") {
        Ok(Some(true))
    } else if s.starts_with("Did not recommend colonoscopy") {
        Ok(Some(false))
    } else if s == "Model unavailable" {
        Ok(None)
    } else {
        Err(bad(format!("unknown decision `{s}`")))
    }
}

/// `6/10 (60.0%)`, or `model unavailable`.
fn tally(s: &str) -> Result<Option<(usize, usize)>> {
    if s == "model unavailable" {
        return Ok(None);
    }
    let frac = s.split_whitespace().next().ok_or_else(|| bad("empty tally"))?;
    let (a, b) = frac.split_once('/').ok_or_else(|| bad(format!("tally `{s}`")))?;
    let parse = |x: &str| x.parse::<usize>().map_err(|_| bad(format!("tally `{s}`")));
    Ok(Some((parse(a)?, parse(b)?)))
}

fn leading_number(s: &str) -> Result<usize> {
    s.split_whitespace()
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad(format!("expected a count in `{s}`")))
}

/// Reads back the document produced by [`super::render_structured`].
pub fn parse_structured(text: &str) -> Result<ParsedReport> {
    let mut out = ParsedReport::default();
    let mut section = "";
    let mut seen = [false; 4];
    for line in text.lines() {
        if let Some(id) = line.strip_prefix("# Clinical report: ") {
            out.patient_id = id.to_string();
            continue;
        }
        if let Some(h) = line.strip_prefix("## ") {
            section = match h {
                "Medications" => "medications",
                "Risk Assessment" => "risk",
                "SHAP Analysis" => "shap",
                "Summary of Results" => "summary",
                _ => "",
            };
            continue;
        }
        let Some(item) = line.strip_prefix("- ") else { continue };
        match section {
            "medications" if item != "None reported" => out.medications.push(item.to_string()),
            "risk" => {
                if let Some(v) = item.strip_prefix("Polyp Risk Model: ") {
                    out.polyp_positive = decision(v)?;
                    seen[0] = true;
                } else if let Some(v) = item.strip_prefix("CRC Risk Model: ") {
                    out.crc_positive = decision(v)?;
                    seen[1] = true;
                } else if let Some(v) = item.strip_prefix("Classification: ") {
                    out.tier = v.split_whitespace().next().and_then(RiskTier::parse);
                }
            }
            "shap" => {
                if let Some(v) = item.strip_prefix("Metadata: ") {
                    out.metadata_flagged_positive = leading_number(v)?;
                    let after = v.split_once(" out of ").ok_or_else(|| bad("metadata line"))?.1;
                    out.positives = leading_number(after)?;
                    let evaluated = after.split_once('(').ok_or_else(|| bad("metadata line"))?.1;
                    out.features_evaluated = leading_number(evaluated)?;
                } else if let Some(v) = item.strip_prefix("Spectral Dataset: ") {
                    let (count, names) = v.split_once(" flagged: ").ok_or_else(|| bad("spectral line"))?;
                    out.spectral_flagged = list(names);
                    if leading_number(count)? != out.spectral_flagged.len() {
                        return Err(bad("spectral count disagrees with the listed features"));
                    }
                }
            }
            "summary" => {
                if let Some(v) = item.strip_prefix("Peaks suggesting the presence of a polyp: ") {
                    out.polyp_tally = tally(v)?;
                    seen[2] = true;
                } else if let Some(v) = item.strip_prefix("Peaks suggesting the presence of CRC: ") {
                    out.crc_tally = tally(v)?;
                    seen[3] = true;
                } else if let Some(v) = item.strip_prefix("Potential false positives due to medications/comorbidities: ") {
                    out.false_positive_count = leading_number(v)?;
                } else if let Some(v) = item.strip_prefix("Features potentially leading to false positives: ") {
                    out.false_positive_names = list(v);
                }
            }
            _ => {}
        }
    }
    if seen.contains(&false) {
        return Err(bad("missing risk or summary lines"));
    }
    if out.false_positive_count != out.false_positive_names.len() {
        return Err(bad("false-positive count disagrees with the listed names"));
    }
    Ok(out)
}
