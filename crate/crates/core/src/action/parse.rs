use std::ops::Range;

use thiserror::Error;

use super::{is_key_name, Action, ActionScript, MouseButton};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnknownAction { name: String },
    Arity { action: String, detail: String },
    ArgType { action: String, detail: String },
    Syntax { detail: String },
    NonCallStatement,
}

/// A parse failure. `span` is a byte range into the text that was parsed;
/// `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, bytes {}..{}: {}", span.start, span.end, describe(kind))]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub span: Range<usize>,
    pub line: usize,
}

fn describe(kind: &ParseErrorKind) -> String {
    match kind {
        ParseErrorKind::UnknownAction { name } => format!("unknown action `{name}`"),
        ParseErrorKind::Arity { action, detail } => format!("wrong arguments to `{action}`: {detail}"),
        ParseErrorKind::ArgType { action, detail } => format!("bad argument to `{action}`: {detail}"),
        ParseErrorKind::Syntax { detail } => format!("syntax error: {detail}"),
        ParseErrorKind::NonCallStatement => "statement is not an action call".to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptMode {
    /// Only call statements (blank lines allowed).
    Strict,
    /// Also tolerates import lines, `#` comments and a `pyautogui.` qualifier.
    Preaction,
}

#[derive(Debug, Clone)]
enum Literal {
    Int(i128),
    Float,
    Str(String),
    List,
}

impl Literal {
    fn type_name(&self) -> &'static str {
        match self {
            Literal::Int(_) => "integer",
            Literal::Float => "float",
            Literal::Str(_) => "string",
            Literal::List => "list",
        }
    }
}

#[derive(Debug, Clone)]
struct Arg {
    name: Option<String>,
    value: Literal,
    /// Raw numeric text, kept so large integers can still be read as floats.
    raw: String,
    span: Range<usize>,
}

struct Call {
    name: String,
    name_span: Range<usize>,
    args: Vec<Arg>,
    span: Range<usize>,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    /// Offset of `src` inside the caller's full text.
    base: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, base: usize, line: usize) -> Self {
        Cursor { src, pos: 0, base, line }
    }

    fn err(&self, kind: ParseErrorKind, span: Range<usize>) -> ParseError {
        let end = span.end.min(self.src.len());
        let start = span.start.min(end);
        ParseError { kind, span: self.base + start..self.base + end, line: self.line }
    }

    fn syntax(&self, detail: impl Into<String>) -> ParseError {
        let end = (self.pos + self.peek().map_or(0, char::len_utf8)).min(self.src.len());
        self.err(ParseErrorKind::Syntax { detail: detail.into() }, self.pos..end)
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Option<Range<usize>> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return None,
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_' || c == '.') {
            self.bump();
        }
        Some(start..self.pos)
    }

    fn call(&mut self) -> Result<Call, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let Some(name_span) = self.ident() else {
            return Err(self.err(ParseErrorKind::NonCallStatement, start..self.src.len()));
        };
        let name = self.src[name_span.clone()].to_string();
        self.skip_ws();
        if !self.eat('(') {
            return Err(self.err(ParseErrorKind::NonCallStatement, start..self.src.len()));
        }
        let args = self.args(')')?;
        Ok(Call { name, name_span, args, span: start..self.pos })
    }

    /// Comma-separated arguments up to and including `close`.
    fn args(&mut self, close: char) -> Result<Vec<Arg>, ParseError> {
        let mut args = Vec::new();
        loop {
            self.skip_ws();
            if self.eat(close) {
                return Ok(args);
            }
            args.push(self.arg(close == ')')?);
            self.skip_ws();
            if self.eat(',') {
                continue;
            }
            if self.eat(close) {
                return Ok(args);
            }
            return Err(self.syntax(format!("expected `,` or `{close}`")));
        }
    }

    fn arg(&mut self, allow_keyword: bool) -> Result<Arg, ParseError> {
        let start = self.pos;
        let mut name = None;
        if allow_keyword {
            if let Some(span) = self.ident() {
                self.skip_ws();
                if self.eat('=') {
                    name = Some(self.src[span].to_string());
                    self.skip_ws();
                } else {
                    self.pos = start;
                    return Err(self.syntax("expected a literal argument"));
                }
            }
        }
        let lit_start = self.pos;
        let value = self.literal()?;
        let raw = self.src[lit_start..self.pos].to_string();
        Ok(Arg { name, value, raw, span: lit_start..self.pos })
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        match self.peek() {
            Some(q @ ('\'' | '"')) => {
                self.bump();
                self.string(q).map(Literal::Str)
            }
            Some('[') => {
                self.bump();
                self.args(']').map(|_| Literal::List)
            }
            Some(c) if c == '-' || c == '+' || c.is_ascii_digit() || c == '.' => self.number(),
            None => Err(self.syntax("unexpected end of input")),
            _ => Err(self.syntax("expected a literal argument")),
        }
    }

    fn string(&mut self, quote: char) -> Result<String, ParseError> {
        let open = self.pos - 1;
        let mut out = String::new();
        loop {
            match self.bump() {
                None => {
                    return Err(self.err(
                        ParseErrorKind::Syntax { detail: "unterminated string".into() },
                        open..self.src.len(),
                    ))
                }
                Some(c) if c == quote => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('r') => out.push('\r'),
                    Some('t') => out.push('\t'),
                    Some(c @ ('\\' | '\'' | '"')) => out.push(c),
                    Some(c) => {
                        out.push('\\');
                        out.push(c);
                    }
                    None => {
                        return Err(self.err(
                            ParseErrorKind::Syntax { detail: "unterminated string".into() },
                            open..self.src.len(),
                        ))
                    }
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn number(&mut self) -> Result<Literal, ParseError> {
        let start = self.pos;
        if matches!(self.peek(), Some('-' | '+')) {
            self.bump();
        }
        let mut is_float = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                self.bump();
            } else if c == '.' || c == 'e' || c == 'E' {
                is_float = true;
                self.bump();
                if (c == 'e' || c == 'E') && matches!(self.peek(), Some('-' | '+')) {
                    self.bump();
                }
            } else {
                break;
            }
        }
        let text = &self.src[start..self.pos];
        let bad = || {
            self.err(ParseErrorKind::Syntax { detail: format!("malformed number `{text}`") }, start..self.pos)
        };
        if is_float {
            text.parse::<f64>().map(|_| Literal::Float).map_err(|_| bad())
        } else {
            match text.parse::<i128>() {
                Ok(v) => Ok(Literal::Int(v)),
                // Too wide for i128; still a valid float literal.
                Err(_) => text.parse::<f64>().map(|_| Literal::Float).map_err(|_| bad()),
            }
        }
    }
}

/// Binds positional and keyword arguments against a parameter list.
struct Binder<'c> {
    call: &'c Call,
    action: &'static str,
    cursor: &'c Cursor<'c>,
}

impl<'c> Binder<'c> {
    fn arity(&self, detail: impl Into<String>) -> ParseError {
        self.cursor.err(
            ParseErrorKind::Arity { action: self.action.into(), detail: detail.into() },
            self.call.span.clone(),
        )
    }

    fn arg_type(&self, arg: &Arg, detail: impl Into<String>) -> ParseError {
        self.cursor.err(
            ParseErrorKind::ArgType { action: self.action.into(), detail: detail.into() },
            arg.span.clone(),
        )
    }

    /// Returns one slot per parameter; `required` parameters must be filled.
    fn bind(&self, params: &[(&str, bool)]) -> Result<Vec<Option<&'c Arg>>, ParseError> {
        let mut slots: Vec<Option<&Arg>> = vec![None; params.len()];
        let mut positional = 0;
        let mut seen_keyword = false;
        for arg in &self.call.args {
            match &arg.name {
                None => {
                    if seen_keyword {
                        return Err(self.arity("positional argument after keyword argument"));
                    }
                    if positional >= params.len() {
                        return Err(self.arity(format!(
                            "takes at most {} argument(s), got {}",
                            params.len(),
                            self.call.args.len()
                        )));
                    }
                    slots[positional] = Some(arg);
                    positional += 1;
                }
                Some(name) => {
                    seen_keyword = true;
                    let Some(i) = params.iter().position(|(p, _)| p == name) else {
                        return Err(self.arity(format!("unexpected keyword argument `{name}`")));
                    };
                    if slots[i].is_some() {
                        return Err(self.arity(format!("argument `{name}` given twice")));
                    }
                    slots[i] = Some(arg);
                }
            }
        }
        for ((name, required), slot) in params.iter().zip(&slots) {
            if *required && slot.is_none() {
                return Err(self.arity(format!("missing argument `{name}`")));
            }
        }
        Ok(slots)
    }

    fn coord(&self, arg: &Arg) -> Result<u32, ParseError> {
        match arg.value {
            Literal::Int(v) if v >= 0 && v <= u32::MAX as i128 => Ok(v as u32),
            Literal::Int(v) if v < 0 => Err(self.arg_type(arg, "coordinates must be non-negative")),
            Literal::Int(_) => Err(self.arg_type(arg, "coordinate out of range")),
            ref other => Err(self.arg_type(arg, format!("coordinate must be an integer, got {}", other.type_name()))),
        }
    }

    fn string(&self, arg: &Arg) -> Result<String, ParseError> {
        match &arg.value {
            Literal::Str(s) => Ok(s.clone()),
            other => Err(self.arg_type(arg, format!("expected a string, got {}", other.type_name()))),
        }
    }

    fn key(&self, arg: &Arg) -> Result<String, ParseError> {
        let key = self.string(arg)?.to_ascii_lowercase();
        if is_key_name(&key) {
            Ok(key)
        } else {
            Err(self.arg_type(arg, format!("unknown key `{key}`")))
        }
    }

    fn button(&self, arg: Option<&Arg>) -> Result<MouseButton, ParseError> {
        let Some(arg) = arg else { return Ok(MouseButton::Left) };
        let name = self.string(arg)?;
        MouseButton::from_name(&name)
            .ok_or_else(|| self.arg_type(arg, format!("unknown mouse button `{name}`")))
    }

    fn clicks(&self, arg: Option<&Arg>) -> Result<u32, ParseError> {
        let Some(arg) = arg else { return Ok(1) };
        match arg.value {
            Literal::Int(v) if v >= 1 && v <= u32::MAX as i128 => Ok(v as u32),
            _ => Err(self.arg_type(arg, "clicks must be a positive integer")),
        }
    }

    fn duration(&self, arg: Option<&Arg>) -> Result<f64, ParseError> {
        let Some(arg) = arg else { return Ok(0.0) };
        let d = match arg.value {
            Literal::Int(_) | Literal::Float => arg.raw.parse::<f64>().ok(),
            _ => None,
        };
        match d {
            Some(d) if d.is_finite() && d >= 0.0 => Ok(if d == 0.0 { 0.0 } else { d }),
            _ => Err(self.arg_type(arg, "duration must be a non-negative number of seconds")),
        }
    }

    fn scroll_amount(&self, arg: &Arg) -> Result<i64, ParseError> {
        match arg.value {
            Literal::Int(v) if v >= i64::MIN as i128 && v <= i64::MAX as i128 => Ok(v as i64),
            _ => Err(self.arg_type(arg, "scroll amount must be an integer")),
        }
    }
}

fn lower(cursor: &Cursor<'_>, call: &Call, qualified_ok: bool) -> Result<Action, ParseError> {
    let mut name = call.name.as_str();
    if qualified_ok {
        name = name.strip_prefix("pyautogui.").unwrap_or(name);
    }
    let action: &'static str = match name {
        "moveTo" => "moveTo",
        "click" => "click",
        "rightClick" => "rightClick",
        "doubleClick" => "doubleClick",
        "write" => "write",
        "hotkey" => "hotkey",
        "scroll" => "scroll",
        "dragTo" => "dragTo",
        "mouseDown" => "mouseDown",
        "mouseUp" => "mouseUp",
        "press" => "press",
        "keyDown" => "keyDown",
        "keyUp" => "keyUp",
        _ => {
            return Err(cursor.err(
                ParseErrorKind::UnknownAction { name: call.name.clone() },
                call.name_span.clone(),
            ))
        }
    };
    let b = Binder { call, action, cursor };
    let a = match action {
        "moveTo" => {
            let s = b.bind(&[("x", true), ("y", true)])?;
            Action::MoveTo { x: b.coord(s[0].unwrap())?, y: b.coord(s[1].unwrap())? }
        }
        "click" => {
            let s = b.bind(&[("x", true), ("y", true), ("clicks", false), ("button", false)])?;
            Action::Click {
                x: b.coord(s[0].unwrap())?,
                y: b.coord(s[1].unwrap())?,
                clicks: b.clicks(s[2])?,
                button: b.button(s[3])?,
            }
        }
        "rightClick" | "doubleClick" => {
            let s = b.bind(&[("x", true), ("y", true)])?;
            let (button, clicks) =
                if action == "rightClick" { (MouseButton::Right, 1) } else { (MouseButton::Left, 2) };
            Action::Click { x: b.coord(s[0].unwrap())?, y: b.coord(s[1].unwrap())?, button, clicks }
        }
        "write" => {
            let s = b.bind(&[("message", true)])?;
            Action::Write { text: b.string(s[0].unwrap())? }
        }
        "hotkey" => {
            if let Some(kw) = call.args.iter().find(|a| a.name.is_some()) {
                return Err(b.arg_type(kw, "hotkey takes key names only"));
            }
            if call.args.len() < 2 {
                return Err(b.arity(format!("needs at least 2 keys, got {}", call.args.len())));
            }
            let mut keys: Vec<String> = Vec::with_capacity(call.args.len());
            for arg in &call.args {
                let k = b.key(arg)?;
                if keys.contains(&k) {
                    return Err(b.arg_type(arg, format!("key `{k}` repeated")));
                }
                keys.push(k);
            }
            Action::Hotkey { keys }
        }
        "scroll" => {
            let s = b.bind(&[("clicks", true)])?;
            Action::Scroll { amount: b.scroll_amount(s[0].unwrap())? }
        }
        "dragTo" => {
            let s = b.bind(&[("x", true), ("y", true), ("duration", false)])?;
            Action::DragTo {
                x: b.coord(s[0].unwrap())?,
                y: b.coord(s[1].unwrap())?,
                duration: b.duration(s[2])?,
            }
        }
        "mouseDown" | "mouseUp" => {
            let s = b.bind(&[("button", false)])?;
            let button = b.button(s[0])?;
            if action == "mouseDown" {
                Action::MouseDown { button }
            } else {
                Action::MouseUp { button }
            }
        }
        "press" | "keyDown" | "keyUp" => {
            let s = b.bind(&[("key", true)])?;
            let arg = s[0].unwrap();
            if matches!(arg.value, Literal::List) {
                return Err(b.arg_type(arg, "takes a single key; use hotkey for combinations"));
            }
            let key = b.key(arg)?;
            match action {
                "press" => Action::Press { key },
                "keyDown" => Action::KeyDown { key },
                _ => Action::KeyUp { key },
            }
        }
        _ => unreachable!(),
    };
    Ok(a)
}

/// Parses a single call expression such as `click(200, 300)`.
pub fn parse_action(text: &str) -> Result<Action, ParseError> {
    let mut cur = Cursor::new(text, 0, 1);
    let call = cur.call()?;
    cur.skip_ws();
    if !cur.at_end() {
        return Err(cur.syntax("trailing input after call"));
    }
    lower(&cur, &call, false)
}

fn is_import_line(line: &str) -> bool {
    line.starts_with("import ") || (line.starts_with("from ") && line.contains(" import "))
}

/// Parses newline- and semicolon-separated calls.
pub fn parse_script(text: &str, mode: ScriptMode) -> Result<ActionScript, ParseError> {
    let mut actions = Vec::new();
    let mut offset = 0;
    for (idx, raw_line) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let base = offset;
        offset += raw_line.len() + 1;

        let trimmed = raw_line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let lead = raw_line.len() - raw_line.trim_start().len();
        if mode == ScriptMode::Preaction && (is_import_line(trimmed) || trimmed.starts_with('#')) {
            continue;
        }
        if mode == ScriptMode::Strict && (is_import_line(trimmed) || trimmed.starts_with('#')) {
            return Err(ParseError {
                kind: ParseErrorKind::NonCallStatement,
                span: base + lead..base + lead + trimmed.len(),
                line: line_no,
            });
        }

        let mut cur = Cursor::new(raw_line, base, line_no);
        loop {
            cur.skip_ws();
            while cur.eat(';') {
                cur.skip_ws();
            }
            if cur.at_end() {
                break;
            }
            let call = cur.call()?;
            actions.push(lower(&cur, &call, mode == ScriptMode::Preaction)?);
            cur.skip_ws();
            if cur.at_end() {
                break;
            }
            if !cur.eat(';') {
                return Err(cur.syntax("expected `;` or end of line"));
            }
        }
    }
    Ok(ActionScript { actions, source: text.to_string() })
}
