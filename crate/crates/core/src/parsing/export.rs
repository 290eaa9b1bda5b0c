use super::{EventTemplate, StructuredLog};
use crate::Result;

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv writer input was utf-8"))
}

/// `EventId,EventTemplate,Occurrences`, one row per template in discovery order.
pub fn export_templates_csv(templates: &[EventTemplate]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["EventId", "EventTemplate", "Occurrences"])?;
    for t in templates {
        w.write_record([t.event_id.as_str(), t.template.as_str(), &t.occurrences.to_string()])?;
    }
    finish(w)
}

/// Template CSV data rows without the header line, newline separated.
pub fn templates_csv_rows(templates: &[EventTemplate]) -> Result<String> {
    let csv = export_templates_csv(templates)?;
    let body = csv.split_once('\n').map_or("", |(_, rest)| rest);
    Ok(body.trim_end_matches('\n').to_string())
}

/// `LineId,<header fields>,Content,EventId`, one row per input line.
pub fn export_structured_csv(structured: &StructuredLog) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["LineId".to_string()];
    header.extend(structured.headers.iter().cloned());
    header.push("Content".into());
    header.push("EventId".into());
    w.write_record(&header)?;
    for row in &structured.rows {
        let mut record = Vec::with_capacity(header.len());
        record.push(row.line_id.to_string());
        record.extend(row.fields.iter().cloned());
        record.push(row.content.clone());
        record.push(row.event_id.clone());
        w.write_record(&record)?;
    }
    finish(w)
}
