use std::fmt::Write;

use super::{ClinicalReport, ModelFindings, PatientHeader};
use crate::annotate::{Condition, FeatureSource};
use crate::meta::Sex;

/// "a", "a and b", "a, b and c".
fn join_and<S: AsRef<str>>(items: &[S]) -> String {
    match items {
        [] => String::new(),
        [one] => one.as_ref().to_string(),
        [init @ .., last] => {
            let head: Vec<&str> = init.iter().map(AsRef::as_ref).collect();
            format!("{} and {}", head.join(", "), last.as_ref())
        }
    }
}

fn join_comma<S: AsRef<str>>(items: &[S]) -> String {
    if items.is_empty() {
        return "none".to_string();
    }
    items.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(", ")
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn plural(n: usize, one: &str, many: &str) -> String {
    format!("{n} {}", if n == 1 { one } else { many })
}

fn bmi_phrase(h: &PatientHeader) -> String {
    match h.bmi_percent_over {
        Some(p) if p > 0.0 => format!("{p:.1}% higher than the recommended weight"),
        Some(_) => "within the recommended weight".to_string(),
        None => "not recorded".to_string(),
    }
}

fn sex_word(s: Sex) -> &'static str {
    match s {
        Sex::M => "male",
        Sex::F => "female",
    }
}

fn condition_plural(c: Condition) -> &'static str {
    match c {
        Condition::Polyp => "polyps",
        Condition::Crc => "CRC",
    }
}

fn model_name(c: Condition) -> &'static str {
    match c {
        Condition::Polyp => "Polyp",
        Condition::Crc => "CRC",
    }
}

fn tally_label(c: Condition) -> &'static str {
    match c {
        Condition::Polyp => "a polyp",
        Condition::Crc => "CRC",
    }
}

fn tally(f: &ModelFindings) -> String {
    match f.decision {
        Some(_) => f.evidence.tally(),
        None => "model unavailable".to_string(),
    }
}

fn decision_prose(f: &ModelFindings) -> String {
    let name = model_name(f.condition);
    match f.decision {
        Some(d) if d.positive() => format!(
            "The {name} model recommended that the patient should have a colonoscopy (probability {:.3}).",
            d.probability
        ),
        Some(d) => format!(
            "The {name} model did not recommend the patient for colonoscopy (probability {:.3}).",
            d.probability
        ),
        None => format!("The {name} model is unavailable for this patient (model unavailable); no decision was produced."),
    }
}

fn decision_item(f: &ModelFindings) -> String {
    match f.decision {
        Some(d) if d.positive() => format!("Recommended colonoscopy (probability {:.3})", d.probability),
        Some(d) => format!("Did not recommend colonoscopy (probability {:.3})", d.probability),
        None => "Model unavailable".to_string(),
    }
}

fn evidence_prose(f: &ModelFindings) -> String {
    let ev = &f.evidence;
    let c = f.condition;
    if f.decision.is_none() {
        return format!("The {} model is unavailable, so no {} peaks were assessed.", model_name(c), c.display());
    }
    let mut out = Vec::new();
    if !ev.activated_pathways.is_empty() {
        out.push(format!(
            "The results showed activation in the {}, suggesting a presence of the {}. Peaks suggesting {} were altered, suggesting changes related to the presence of {}.",
            join_and(&ev.activated_pathways),
            c.display(),
            join_and(&ev.metabolites()),
            condition_plural(c)
        ));
    }
    if !ev.absent_pathways.is_empty() {
        let suffix = if ev.activated_pathways.is_empty() {
            format!(", suggesting no presence of {}", condition_plural(c))
        } else {
            String::new()
        };
        out.push(format!("No peaks related to changes in the {} were shown{suffix}.", join_and(&ev.absent_pathways)));
    }
    out.join(" ")
}

fn spectral_line(r: &ClinicalReport) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for f in r.polyp.flagged.iter().chain(&r.crc.flagged) {
        if let FeatureSource::Spectral { wavenumber, .. } = f.source {
            if seen.insert(f.feature.as_str()) {
                let compounds: Vec<&str> = f.compounds().into_iter().collect();
                let tail = if compounds.is_empty() { String::new() } else { format!(" [{}]", compounds.join(", ")) };
                out.push(format!("{} ({wavenumber:.1} cm-1): {}{tail}", f.feature, f.label));
            }
        }
    }
    out
}

/// Prose variant.
pub fn render_text(r: &ClinicalReport) -> String {
    let h = &r.header;
    let hi = &r.history;
    let mut s = String::new();
    let _ = writeln!(s, "CLINICAL SYSTEM TEXT OUTPUT");
    let _ = writeln!(s, "Patient: {}", h.patient_id);
    let _ = writeln!(s);

    let age = h.age.map_or("of unrecorded age".to_string(), |a| format!("{a} years old"));
    let bmi = h.bmi.map_or("BMI not recorded".to_string(), |b| format!("BMI {b:.1}, which is {}", bmi_phrase(h)));
    let smoking = match h.smoking.as_str() {
        "Unknown" => "an unknown smoker status".to_string(),
        other => format!("a {} smoker status", other.to_lowercase().trim_end_matches(" smoker")),
    };
    let _ = writeln!(
        s,
        "The patient reported to the clinic is {age}, {bmi}, with {smoking}, identifies as a {}. The patient's identifier is {}.",
        sex_word(h.sex),
        h.patient_id
    );
    let _ = writeln!(s);

    let conditions = if hi.conditions.is_empty() {
        "The patient reported no current comorbidities".to_string()
    } else {
        format!("The patient suffers from {}", join_and(&hi.conditions))
    };
    let malignancy = if hi.previous_malignancy { "had a previous reported malignancy" } else { "had no previous reported malignancy" };
    let _ = writeln!(s, "{conditions}, and {malignancy}.");
    let _ = writeln!(s);

    let mut para = Vec::new();
    if !hi.negatives.is_empty() {
        para.push(format!("Medical metadata reports no diagnosis of {}.", join_comma(&hi.negatives)));
    }
    if hi.symptoms_present.is_empty() {
        para.push(format!("No additional symptoms were reported, including no {}.", join_comma(&hi.symptoms_absent)));
    } else {
        para.push(format!("The patient reported {}.", join_and(&hi.symptoms_present)));
        if !hi.symptoms_absent.is_empty() {
            para.push(format!("No {} were reported.", join_comma(&hi.symptoms_absent)));
        }
    }
    if !hi.excluded.is_empty() {
        para.push(format!("Patient history excluded comorbidities include: {}.", join_comma(&hi.excluded)));
    }
    if hi.medications.is_empty() {
        para.push("The patient reported no recent medications.".to_string());
    } else {
        para.push(format!("The patient reported taking the following medications recently: {}.", join_comma(&hi.medications)));
    }
    let _ = writeln!(s, "{}", para.join(" "));
    let _ = writeln!(s);

    let tier = match r.tier {
        Some(t) => format!(
            "Therefore, based on the Raman spectra and the patient metadata, the patient is {} risk for developing/suffering from CRC.",
            t.as_str()
        ),
        None => "The combined risk tier cannot be determined because a model is unavailable.".to_string(),
    };
    let _ = writeln!(s, "{} {} {tier}", decision_prose(&r.polyp), decision_prose(&r.crc));
    let _ = writeln!(s);

    let sh = &r.shap;
    let spectral = if sh.spectral_flagged.is_empty() {
        "SHAP values for the spectral dataset flagged up 0 features.".to_string()
    } else {
        format!(
            "SHAP values for the spectral dataset flagged up {} ({}).",
            plural(sh.spectral_flagged.len(), "feature", "features"),
            join_comma(&sh.spectral_flagged)
        )
    };
    let _ = write!(
        s,
        "The SHAP values for metadata flagged up {} out of {} positives in the metadata (among {} possible features that patients were investigated for). {spectral}",
        plural(sh.metadata_flagged_positive, "value", "values"),
        sh.positives,
        sh.features_evaluated
    );
    if !sh.metadata_flagged.is_empty() {
        let _ = write!(s, " Flagged metadata features: {}.", join_comma(&sh.metadata_flagged));
    }
    let _ = writeln!(s);
    let lines = spectral_line(r);
    if !lines.is_empty() {
        let _ = writeln!(s, "Spectral annotations: {}.", lines.join("; "));
    }
    let _ = writeln!(s);

    if r.observations.is_empty() {
        let _ = writeln!(s, "No library profile of metabolic alterations applies to the patient's comorbidities.");
    }
    for p in &r.observations {
        let parts: Vec<String> = p.categories.iter().map(|(c, items)| format!("{c}: {}", join_comma(items))).collect();
        let _ = writeln!(s, "Patients suffering from {} tend to report changes in {}.", p.name, parts.join("; "));
    }
    let _ = writeln!(s);

    let _ = writeln!(s, "{}", evidence_prose(&r.polyp));
    let _ = writeln!(s, "{}", evidence_prose(&r.crc));
    let _ = writeln!(s);

    let _ = writeln!(s, "Overall, the model flagged up the following features:");
    for f in [&r.polyp, &r.crc] {
        let _ = writeln!(s, "peaks suggesting the presence of {}: {}", tally_label(f.condition), tally(f));
    }
    let _ = writeln!(s, "features which could be false positives due to medications/comorbidities: {}", r.overlap.count());
    let _ = writeln!(s, "names of features leading to potential false positives: {}", join_comma(&r.overlap.names()));
    s
}

fn bullet_list(s: &mut String, indent: &str, items: &[String]) {
    for i in items {
        let _ = writeln!(s, "{indent}- {}", capitalize(i));
    }
}

/// Itemized variant with the same content as [`render_text`].
pub fn render_structured(r: &ClinicalReport) -> String {
    let h = &r.header;
    let hi = &r.history;
    let mut s = String::new();
    let _ = writeln!(s, "# Clinical report: {}", h.patient_id);
    let _ = writeln!(s);

    let _ = writeln!(s, "## Patient Information");
    let _ = writeln!(s);
    match h.age {
        Some(a) => {
            let _ = writeln!(s, "- Age: {a} years");
        }
        None => {
            let _ = writeln!(s, "- Age: not recorded");
        }
    }
    match h.bmi {
        Some(b) => {
            let _ = writeln!(s, "- BMI: {b:.1} ({})", bmi_phrase(h));
        }
        None => {
            let _ = writeln!(s, "- BMI: not recorded");
        }
    }
    let _ = writeln!(s, "- Gender: {}", capitalize(sex_word(h.sex)));
    let _ = writeln!(s, "- Smoker Status: {}", h.smoking);
    let _ = writeln!(s, "- Patient ID: {}", h.patient_id);
    let _ = writeln!(s);

    let _ = writeln!(s, "## Medical History");
    let _ = writeln!(s);
    let conditions = if hi.conditions.is_empty() {
        "None reported".to_string()
    } else {
        hi.conditions.iter().map(|c| capitalize(c)).collect::<Vec<_>>().join(", ")
    };
    let _ = writeln!(s, "- Current conditions: {conditions}");
    let _ = writeln!(s, "- {}", if hi.previous_malignancy { "History of malignancy" } else { "No history of malignancy" });
    if !hi.negatives.is_empty() {
        let _ = writeln!(s, "- No diagnoses of the following:");
        bullet_list(&mut s, "  ", &hi.negatives);
    }
    if !hi.symptoms_present.is_empty() {
        let _ = writeln!(s, "- Symptoms reported:");
        bullet_list(&mut s, "  ", &hi.symptoms_present);
    }
    if !hi.symptoms_absent.is_empty() {
        let _ = writeln!(s, "- No additional symptoms reported:");
        bullet_list(&mut s, "  ", &hi.symptoms_absent);
    }
    if !hi.excluded.is_empty() {
        let _ = writeln!(s, "- Excluded comorbidities:");
        bullet_list(&mut s, "  ", &hi.excluded);
    }
    let _ = writeln!(s);

    let _ = writeln!(s, "## Medications");
    let _ = writeln!(s);
    if hi.medications.is_empty() {
        let _ = writeln!(s, "- None reported");
    }
    for m in &hi.medications {
        let _ = writeln!(s, "- {m}");
    }
    let _ = writeln!(s);

    let _ = writeln!(s, "## Risk Assessment");
    let _ = writeln!(s);
    let _ = writeln!(s, "- Polyp Risk Model: {}", decision_item(&r.polyp));
    let _ = writeln!(s, "- CRC Risk Model: {}", decision_item(&r.crc));
    match r.tier {
        Some(t) => {
            let _ = writeln!(s, "- Classification: {} risk for CRC based on Raman spectra and metadata", capitalize(t.as_str()));
        }
        None => {
            let _ = writeln!(s, "- Classification: Undetermined (model unavailable)");
        }
    }
    let _ = writeln!(s);

    let sh = &r.shap;
    let _ = writeln!(s, "## SHAP Analysis");
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "- Metadata: {} flagged out of {} positives ({} features evaluated)",
        plural(sh.metadata_flagged_positive, "significant feature", "significant features"),
        sh.positives,
        sh.features_evaluated
    );
    let _ = writeln!(s, "- Metadata features flagged: {}", join_comma(&sh.metadata_flagged));
    let _ = writeln!(
        s,
        "- Spectral Dataset: {} flagged: {}",
        plural(sh.spectral_flagged.len(), "significant feature", "significant features"),
        join_comma(&sh.spectral_flagged)
    );
    for line in spectral_line(r) {
        let _ = writeln!(s, "  - {line}");
    }
    let _ = writeln!(s);

    let _ = writeln!(s, "## Metabolic Observations");
    let _ = writeln!(s);
    if r.observations.is_empty() {
        let _ = writeln!(s, "No library profile of metabolic alterations applies to the patient's comorbidities.");
    }
    for p in &r.observations {
        let _ = writeln!(s, "Patients with {} tend to exhibit the following metabolic changes:", p.name);
        let _ = writeln!(s);
        for (c, items) in &p.categories {
            let _ = writeln!(s, "- **{}:** {}", capitalize(c), join_comma(items));
        }
        let _ = writeln!(s);
    }
    if r.observations.is_empty() {
        let _ = writeln!(s);
    }

    let _ = writeln!(s, "## Test Results");
    let _ = writeln!(s);
    for f in [&r.polyp, &r.crc] {
        let ev = &f.evidence;
        let c = f.condition;
        if f.decision.is_none() {
            let _ = writeln!(s, "- {} model unavailable: no peaks assessed", model_name(c));
            continue;
        }
        if !ev.activated_pathways.is_empty() {
            let _ = writeln!(
                s,
                "- Activation of {} suggests the presence of {}",
                join_and(&ev.activated_pathways),
                tally_label(c)
            );
            let _ = writeln!(
                s,
                "- Altered peaks associated with {} indicate changes related to {}",
                join_and(&ev.metabolites()),
                condition_plural(c)
            );
        }
        if !ev.absent_pathways.is_empty() {
            let _ = writeln!(s, "- No observed peaks associated with ({}):", c.display());
            bullet_list(&mut s, "  ", &ev.absent_pathways);
        }
        if ev.activated_pathways.is_empty() {
            let _ = writeln!(s, "- No evidence of {}", condition_plural(c));
        }
    }
    let _ = writeln!(s);

    let _ = writeln!(s, "## Summary of Results");
    let _ = writeln!(s);
    for f in [&r.polyp, &r.crc] {
        let _ = writeln!(s, "- Peaks suggesting the presence of {}: {}", tally_label(f.condition), tally(f));
    }
    let _ = writeln!(s, "- Potential false positives due to medications/comorbidities: {}", r.overlap.count());
    let _ = writeln!(s, "- Features potentially leading to false positives: {}", join_comma(&r.overlap.names()));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joins() {
        assert_eq!(join_and::<&str>(&[]), "");
        assert_eq!(join_and(&["a"]), "a");
        assert_eq!(join_and(&["a", "b", "c"]), "a, b and c");
        assert_eq!(join_comma::<&str>(&[]), "none");
        assert_eq!(capitalize("medium"), "Medium");
    }
}
