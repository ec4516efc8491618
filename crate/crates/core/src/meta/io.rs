//! Metadata CSV: one row per patient.
//!
//! Fixed columns `patient_id,age,sex,bmi,smoking_status,diagnosis,
//! previous_malignancy,groups,medications` followed by one `comorbidity:<key>`
//! and one `symptom:<key>` column per field, holding 0 or 1. `groups` and
//! `medications` are semicolon-delimited lists. Empty `age`/`bmi` are missing.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use super::record::{normalize_name, Diagnosis, PatientRecord, Sex, SmokingStatus};
use super::schema::MetadataSchema;
use crate::error::{Error, Result};

const FIXED: [&str; 9] = [
    "patient_id",
    "age",
    "sex",
    "bmi",
    "smoking_status",
    "diagnosis",
    "previous_malignancy",
    "groups",
    "medications",
];

fn bad(detail: String) -> Error {
    Error::Format { what: "metadata CSV", detail }
}

pub fn write_records<W: Write>(writer: W, records: &[PatientRecord], schema: &MetadataSchema) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    header.extend(schema.comorbidities.iter().map(|c| format!("comorbidity:{}", c.key)));
    header.extend(schema.symptoms.iter().map(|c| format!("symptom:{}", c.key)));
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
    let flag = |b: bool| if b { "1" } else { "0" }.to_string();
    for r in records {
        let mut row = vec![
            r.patient_id.clone(),
            opt(r.age),
            r.sex.code().to_string(),
            opt(r.bmi),
            r.smoking_status.code().to_string(),
            r.diagnosis.code().to_string(),
            flag(r.previous_malignancy),
            r.groups.iter().cloned().collect::<Vec<_>>().join(";"),
            r.medications.join(";"),
        ];
        row.extend(schema.comorbidities.iter().map(|c| flag(r.has_comorbidity(&c.key))));
        row.extend(schema.symptoms.iter().map(|s| flag(r.symptoms.get(&s.key).copied().unwrap_or(false))));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<metadata>", e))?;
    Ok(())
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<PatientRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index: BTreeMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    for col in FIXED {
        if !index.contains_key(col) {
            return Err(bad(format!("missing column `{col}`")));
        }
    }
    for h in headers.iter() {
        if !FIXED.contains(&h) && !h.starts_with("comorbidity:") && !h.starts_with("symptom:") {
            return Err(bad(format!("unknown column `{h}`")));
        }
    }
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let line = line + 2;
        let get = |c: &str| row.get(index[c]).unwrap_or("").trim();
        let num = |c: &str| -> Result<Option<f64>> {
            let v = get(c);
            if v.is_empty() {
                Ok(None)
            } else {
                v.parse().map(Some).map_err(|_| bad(format!("line {line}: bad {c} `{v}`")))
            }
        };
        let flag = |v: &str| -> Result<bool> {
            match v.trim() {
                "1" | "true" => Ok(true),
                "0" | "false" | "" => Ok(false),
                other => Err(bad(format!("line {line}: `{other}` is not a 0/1 flag"))),
            }
        };
        let list = |v: &str| -> Vec<String> {
            v.split(';').map(normalize_name).filter(|s| !s.is_empty()).collect()
        };
        let code = |c: &str| -> Result<u8> {
            get(c).parse().map_err(|_| bad(format!("line {line}: bad {c} `{}`", get(c))))
        };
        let mut comorbidities = BTreeMap::new();
        let mut symptoms = BTreeMap::new();
        for (i, h) in headers.iter().enumerate() {
            if let Some(k) = h.strip_prefix("comorbidity:") {
                comorbidities.insert(k.to_string(), flag(&row[i])?);
            } else if let Some(k) = h.strip_prefix("symptom:") {
                symptoms.insert(k.to_string(), flag(&row[i])?);
            }
        }
        let mut medications = list(get("medications"));
        medications.sort();
        medications.dedup();
        let record = PatientRecord {
            patient_id: get("patient_id").to_string(),
            age: num("age")?,
            sex: Sex::parse(get("sex")).ok_or_else(|| bad(format!("line {line}: bad sex `{}`", get("sex"))))?,
            bmi: num("bmi")?,
            smoking_status: SmokingStatus::new(code("smoking_status")?)?,
            diagnosis: Diagnosis::from_code(code("diagnosis")?)
                .ok_or_else(|| bad(format!("line {line}: diagnosis must be 0, 1 or 2")))?,
            comorbidities,
            medications,
            previous_malignancy: flag(get("previous_malignancy"))?,
            symptoms,
            groups: list(get("groups")).into_iter().map(|g| g.replace(' ', "_")).collect(),
        };
        record.validate()?;
        if !seen.insert(record.patient_id.clone()) {
            return Err(bad(format!("line {line}: duplicate patient_id `{}`", record.patient_id)));
        }
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_missing_values() {
        let schema = MetadataSchema::compact(5);
        let mut comorbidities: BTreeMap<String, bool> =
            schema.comorbidities.iter().map(|c| (c.key.clone(), false)).collect();
        comorbidities.insert("hypertension".into(), true);
        let symptoms = schema.symptoms.iter().map(|c| (c.key.clone(), c.key == "constipation")).collect();
        let r = PatientRecord {
            patient_id: "P0001".into(),
            age: Some(61.5),
            sex: Sex::M,
            bmi: None,
            smoking_status: SmokingStatus::new(1).unwrap(),
            diagnosis: Diagnosis::Polyp,
            comorbidities,
            medications: vec!["bendroflumethiazide".into(), "paracetamol".into()],
            previous_malignancy: false,
            symptoms,
            groups: ["substance_abuse".to_string()].into_iter().collect(),
        };
        let mut buf = Vec::new();
        write_records(&mut buf, std::slice::from_ref(&r), &schema).unwrap();
        let back = read_records(buf.as_slice()).unwrap();
        assert_eq!(back, vec![r]);
    }

    #[test]
    fn rejects_unknown_columns_and_bad_codes() {
        let text = "patient_id,age,sex,bmi,smoking_status,diagnosis,previous_malignancy,groups,medications,extra\n";
        assert!(read_records(text.as_bytes()).is_err());
        let text = "patient_id,age,sex,bmi,smoking_status,diagnosis,previous_malignancy,groups,medications\nP1,50,M,22,3,1,0,,\n";
        assert!(read_records(text.as_bytes()).is_err());
        let text = "patient_id,age,sex,bmi,smoking_status,diagnosis,previous_malignancy,groups,medications\nP1,-5,M,22,0,1,0,,\n";
        assert!(read_records(text.as_bytes()).is_err());
    }
}
