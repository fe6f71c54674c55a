//! Line-oriented text serialization of traces as begin/end records. The
//! format is specified in `docs/trace-format.md`.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::filter::{Filter, Footprint};
use crate::runtime::ProbeRequest;
use crate::trace::{Event, EventId, EventKind, GroupTag, Time, Trace, TraceError};
use crate::value::{ProbeResult, Value};

pub const VERSION_LINE: &str = "#evtrace-trace v1";

/// Provenance written before the records.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TraceHeader {
    pub source_name: String,
    pub filter: Filter,
    /// Target shape and expression text of every probe requested for the run.
    pub probes: Vec<(Footprint, String)>,
}

impl TraceHeader {
    pub fn new(source_name: &str, filter: &Filter, probes: &[ProbeRequest]) -> TraceHeader {
        TraceHeader {
            source_name: source_name.to_string(),
            filter: filter.clone(),
            probes: probes.iter().map(|p| (p.target.clone(), p.expr_text.clone())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceRecord {
    Begin {
        id: EventId,
        kind: EventKind,
        name: String,
        source_line: u32,
        enclosing_function: String,
        time: Time,
        group: Option<GroupTag>,
    },
    End {
        id: EventId,
        time: Time,
        probes: Vec<(String, ProbeResult)>,
    },
}

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("unsupported trace format: expected `{VERSION_LINE}`, found `{found}`")]
    VersionMismatch { found: String },
    #[error("unbalanced trace: events {} never end", format_ids(open))]
    Unbalanced { open: Vec<EventId> },
    #[error("line {line}: event {id} begins twice")]
    DuplicateId { line: usize, id: EventId },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("inconsistent trace: {0}")]
    Invalid(#[from] TraceError),
}

fn format_ids(ids: &[EventId]) -> String {
    ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

/// The begin/end records of a trace in emission order.
pub fn records(trace: &Trace) -> Vec<TraceRecord> {
    let mut out = Vec::with_capacity(trace.len() * 2);
    let mut open: Vec<&Event> = Vec::new();
    let end = |e: &Event| TraceRecord::End {
        id: e.id,
        time: e.end_time,
        probes: e.probes.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
    };
    for e in trace.events() {
        while let Some(top) = open.last() {
            if e.id <= trace.subtree_end(top.id) {
                break;
            }
            out.push(end(top));
            open.pop();
        }
        out.push(TraceRecord::Begin {
            id: e.id,
            kind: e.kind,
            name: e.name.clone(),
            source_line: e.source_line,
            enclosing_function: e.enclosing_function.clone(),
            time: e.begin_time,
            group: e.unordered_group,
        });
        open.push(e);
    }
    while let Some(top) = open.pop() {
        out.push(end(top));
    }
    out
}

/// Streaming writer: the header goes out on construction, then one line per
/// record.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, header: &TraceHeader) -> io::Result<TraceWriter<W>> {
        writeln!(out, "{VERSION_LINE}")?;
        writeln!(out, "#source\t{}", escape(&header.source_name))?;
        writeln!(out, "#filter\t{}", if header.filter.pass_all { "all" } else { "derived" })?;
        for f in &header.filter.footprints {
            writeln!(out, "#record\t{}", footprint_fields(f))?;
        }
        for f in &header.filter.keep_structure {
            writeln!(out, "#keep\t{}", footprint_fields(f))?;
        }
        for (f, text) in &header.probes {
            writeln!(out, "#probe\t{}\t{}", footprint_fields(f), escape(text))?;
        }
        Ok(TraceWriter { out })
    }

    pub fn record(&mut self, r: &TraceRecord) -> io::Result<()> {
        match r {
            TraceRecord::Begin { id, kind, name, source_line, enclosing_function, time, group } => {
                let group = group.map_or("-".to_string(), |g| g.0.to_string());
                writeln!(
                    self.out,
                    "B\t{}\t{}\t{time}\t{source_line}\t{group}\t{}\t{}",
                    id.0,
                    kind.keyword(),
                    escape(enclosing_function),
                    escape(name)
                )
            }
            TraceRecord::End { id, time, probes } => {
                write!(self.out, "E\t{}\t{time}", id.0)?;
                for (expr, value) in probes {
                    write!(self.out, "\t{}\t{}", escape(expr), encode_value(value))?;
                }
                writeln!(self.out)
            }
        }
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Writes a whole trace.
pub fn write_trace<W: Write>(out: W, trace: &Trace, header: &TraceHeader) -> io::Result<W> {
    let mut w = TraceWriter::new(out, header)?;
    for r in records(trace) {
        w.record(&r)?;
    }
    w.finish()
}

/// Serializes to a string.
pub fn trace_to_string(trace: &Trace, header: &TraceHeader) -> String {
    let bytes = write_trace(Vec::new(), trace, header).expect("writing to memory cannot fail");
    String::from_utf8(bytes).expect("the writer emits UTF-8")
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Trace, TraceIoError> {
    read_trace_with_header(input).map(|(_, t)| t)
}

/// Reads a trace, rebuilding parent links from the bracket nesting.
pub fn read_trace_with_header<R: BufRead>(input: R) -> Result<(TraceHeader, Trace), TraceIoError> {
    let mut header = TraceHeader { filter: Filter::empty(), ..TraceHeader::default() };
    let mut events: Vec<Event> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    let mut ended: Vec<bool> = Vec::new();
    let mut seen_record = false;
    let mut saw_version = false;
    for (index, line) in input.lines().enumerate() {
        let line = line?;
        let n = index + 1;
        let malformed = |message: String| TraceIoError::Malformed { line: n, message };
        if n == 1 {
            if line != VERSION_LINE {
                return Err(TraceIoError::VersionMismatch { found: line });
            }
            saw_version = true;
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if let Some(tag) = fields[0].strip_prefix('#') {
            if seen_record {
                return Err(malformed("header line after the first record".into()));
            }
            read_header_line(&mut header, tag, &fields[1..]).map_err(malformed)?;
            continue;
        }
        seen_record = true;
        match fields[0] {
            "B" => {
                if fields.len() != 8 {
                    return Err(malformed(format!("begin record needs 8 fields, found {}", fields.len())));
                }
                let id = EventId(parse_num(fields[1], "event id").map_err(malformed)?);
                if id.0 < events.len() {
                    return Err(TraceIoError::DuplicateId { line: n, id });
                }
                if id.0 != events.len() {
                    return Err(malformed(format!("expected event #{} next, found {id}", events.len())));
                }
                let kind = EventKind::from_keyword(fields[2])
                    .ok_or_else(|| malformed(format!("unknown event kind `{}`", fields[2])))?;
                let time = parse_num(fields[3], "time").map_err(malformed)?;
                let source_line = parse_num(fields[4], "source line").map_err(malformed)?;
                let group = match fields[5] {
                    "-" => None,
                    g => Some(GroupTag(parse_num(g, "group").map_err(malformed)?)),
                };
                events.push(Event {
                    id,
                    kind,
                    name: unescape(fields[7]).map_err(malformed)?,
                    source_line,
                    enclosing_function: unescape(fields[6]).map_err(malformed)?,
                    begin_time: time,
                    end_time: time,
                    parent: open.last().map(|&p| EventId(p)),
                    unordered_group: group,
                    probes: BTreeMap::new(),
                });
                ended.push(false);
                open.push(id.0);
            }
            "E" => {
                if fields.len() < 3 || fields.len().is_multiple_of(2) {
                    return Err(malformed("end record needs an id, a time and probe pairs".into()));
                }
                let id: usize = parse_num(fields[1], "event id").map_err(malformed)?;
                if id >= events.len() {
                    return Err(malformed(format!("event #{id} ends before it begins")));
                }
                if ended[id] {
                    return Err(malformed(format!("event #{id} ends twice")));
                }
                if open.last() != Some(&id) {
                    let inner = open.last().map_or(String::new(), |i| format!(" while #{i} is open"));
                    return Err(malformed(format!("event #{id} ends out of order{inner}")));
                }
                open.pop();
                ended[id] = true;
                let e = &mut events[id];
                e.end_time = parse_num(fields[2], "time").map_err(malformed)?;
                for pair in fields[3..].chunks(2) {
                    let key = unescape(pair[0]).map_err(malformed)?;
                    e.probes.insert(key, decode_value(pair[1]).map_err(malformed)?);
                }
            }
            other => return Err(malformed(format!("unknown record type `{other}`"))),
        }
    }
    if !saw_version {
        return Err(TraceIoError::VersionMismatch { found: String::new() });
    }
    if !open.is_empty() {
        return Err(TraceIoError::Unbalanced { open: open.into_iter().map(EventId).collect() });
    }
    let trace = Trace::new(header.source_name.clone(), events)?;
    Ok((header, trace))
}

fn read_header_line(h: &mut TraceHeader, tag: &str, fields: &[&str]) -> Result<(), String> {
    match tag {
        "source" if fields.len() == 1 => h.source_name = unescape(fields[0])?,
        "filter" if fields.len() == 1 => match fields[0] {
            "all" => h.filter.pass_all = true,
            "derived" => h.filter.pass_all = false,
            other => return Err(format!("unknown filter mode `{other}`")),
        },
        "record" => {
            h.filter.footprints.insert(parse_footprint(fields)?);
        }
        "keep" => {
            h.filter.keep_structure.insert(parse_footprint(fields)?);
        }
        "probe" if fields.len() == 4 => {
            h.probes.push((parse_footprint(&fields[..3])?, unescape(fields[3])?));
        }
        other => return Err(format!("malformed header line `#{other}`")),
    }
    Ok(())
}

fn footprint_fields(f: &Footprint) -> String {
    let opt = |o: &Option<String>| o.as_ref().map_or("*".to_string(), |s| format!("={}", escape(s)));
    format!("{}\t{}\t{}", f.kind.keyword(), opt(&f.name), opt(&f.enclosing_function))
}

fn parse_footprint(fields: &[&str]) -> Result<Footprint, String> {
    let [kind, name, func] = fields else {
        return Err("a footprint needs a kind, a name and a function".into());
    };
    let kind = EventKind::from_keyword(kind).ok_or_else(|| format!("unknown event kind `{kind}`"))?;
    let opt = |s: &str| -> Result<Option<String>, String> {
        match s {
            "*" => Ok(None),
            _ => match s.strip_prefix('=') {
                Some(v) => unescape(v).map(Some),
                None => Err(format!("bad footprint field `{s}`")),
            },
        }
    };
    Ok(Footprint { kind, name: opt(name)?, enclosing_function: opt(func)? })
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("bad {what} `{s}`"))
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next() {
            Some('\\') => '\\',
            Some('t') => '\t',
            Some('n') => '\n',
            Some('r') => '\r',
            Some(other) => return Err(format!("unknown escape `\\{other}`")),
            None => return Err("dangling `\\` at end of field".into()),
        });
    }
    Ok(out)
}

fn encode_value(v: &ProbeResult) -> String {
    match v {
        Ok(Value::Int(n)) => format!("i:{n}"),
        Ok(Value::Bool(b)) => format!("b:{b}"),
        Ok(Value::Str(s)) => format!("s:{}", escape(s)),
        Ok(Value::Unit) => "u".into(),
        Err(e) => format!("!:{}", escape(e)),
    }
}

fn decode_value(s: &str) -> Result<ProbeResult, String> {
    if s == "u" {
        return Ok(Ok(Value::Unit));
    }
    let (tag, body) = s.split_once(':').ok_or_else(|| format!("bad probe value `{s}`"))?;
    Ok(match tag {
        "i" => Ok(Value::Int(parse_num(body, "integer")?)),
        "b" => Ok(Value::Bool(parse_num(body, "boolean")?)),
        "s" => Ok(Value::Str(unescape(body)?)),
        "!" => Err(unescape(body)?),
        _ => return Err(format!("bad probe value `{s}`")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minic::parse_program;
    use crate::runtime::{execute, ExecOptions};

    fn sample() -> (Trace, TraceHeader) {
        let p = parse_program("t", "var x; func main() { x = 0; }").unwrap();
        let r = execute(&p, "", &Filter::pass_all(), &[], ExecOptions::default());
        (r.trace, TraceHeader::new("t", &Filter::pass_all(), &[]))
    }

    #[test]
    fn single_assignment_file() {
        let (t, h) = sample();
        let text = trace_to_string(&t, &h);
        let expected = "#evtrace-trace v1\n#source\tt\n#filter\tall\n\
            B\t0\texecute_program\t1\t1\t-\tt\tt\n\
            B\t1\tex_stmt\t2\t1\t-\tmain\tx = 0;\n\
            B\t2\teval_expr\t3\t1\t-\tmain\tx = 0\n\
            B\t3\teval_expr\t4\t1\t-\tmain\t0\n\
            E\t3\t5\n\
            B\t4\tdestination\t6\t1\t-\tmain\tx\n\
            E\t4\t6\n\
            E\t2\t7\n\
            E\t1\t8\n\
            E\t0\t9\n";
        assert_eq!(text, expected);
        let (h2, t2) = read_trace_with_header(text.as_bytes()).unwrap();
        assert_eq!(t2, t);
        assert_eq!(h2, h);
    }

    #[test]
    fn probes_and_escapes_round_trip() {
        let (mut t, _) = sample();
        let mut events = t.events().to_vec();
        events[2].probes.insert("a\tb".into(), Ok(Value::Str("x\\y\nz".into())));
        events[2].probes.insert("e".into(), Err("boom\r".into()));
        events[2].probes.insert("u".into(), Ok(Value::Unit));
        events[2].probes.insert("b".into(), Ok(Value::Bool(false)));
        events[1].name = "tab\there".into();
        t = Trace::new("t", events).unwrap();
        let mut filter = Filter::empty();
        filter.footprints.insert(Footprint::new(EventKind::FuncCall, Some("*"), None));
        filter.keep_structure.insert(Footprint::new(EventKind::FuncCall, Some("f"), Some("main")));
        let h = TraceHeader {
            source_name: "t".into(),
            filter: filter.clone(),
            probes: vec![(Footprint::new(EventKind::ExStmt, None, None), "n\t1".into())],
        };
        let text = trace_to_string(&t, &h);
        let (h2, t2) = read_trace_with_header(text.as_bytes()).unwrap();
        assert_eq!(t2, t);
        assert_eq!(h2, h);
    }

    #[test]
    fn load_errors() {
        let (t, h) = sample();
        let text = trace_to_string(&t, &h);
        let lines: Vec<&str> = text.lines().collect();

        let truncated = lines[..lines.len() - 2].join("\n");
        match read_trace(truncated.as_bytes()) {
            Err(TraceIoError::Unbalanced { open }) => assert_eq!(open, vec![EventId(0), EventId(1)]),
            other => panic!("{other:?}"),
        }

        let reversed = text.replace(
            "B\t4\tdestination\t6\t1\t-\tmain\tx\nE\t4\t6\n",
            "E\t4\t6\nB\t4\tdestination\t6\t1\t-\tmain\tx\n",
        );
        assert!(matches!(read_trace(reversed.as_bytes()), Err(TraceIoError::Malformed { line: 9, .. })));

        let dup = text.replace("B\t4\t", "B\t3\t");
        assert!(matches!(read_trace(dup.as_bytes()), Err(TraceIoError::DuplicateId { id: EventId(3), .. })));

        let wrong = text.replace("v1", "v2");
        assert!(matches!(read_trace(wrong.as_bytes()), Err(TraceIoError::VersionMismatch { .. })));
        assert!(matches!(read_trace("".as_bytes()), Err(TraceIoError::VersionMismatch { .. })));

        let misnested = text.replace("E\t2\t7\nE\t1\t8\n", "E\t1\t8\nE\t2\t7\n");
        assert!(matches!(read_trace(misnested.as_bytes()), Err(TraceIoError::Malformed { .. })));

        let bad_time = text.replace("E\t1\t8", "E\t1\t99");
        assert!(matches!(read_trace(bad_time.as_bytes()), Err(TraceIoError::Invalid(_))));
    }
}
