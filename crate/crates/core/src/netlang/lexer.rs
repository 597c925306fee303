use super::{DiagnosticSeverity, ParseDiagnostic, SourceSpan};

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(f64),
    LBrace,
    RBrace,
    Semi,
    Colon,
    Eq,
    Newline,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(n) => format!("number {n}"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

/// Splits `text` into tokens. `\r\n` is folded into a single newline.
pub(crate) fn lex(text: &str, file: &str) -> (Vec<Token>, Vec<ParseDiagnostic>) {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut diags = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    let span = |line, column, length, offset| SourceSpan { file: file.to_string(), line, column, length, offset };

    while i < chars.len() {
        let (offset, c) = chars[i];
        let start_col = col;
        match c {
            '\r' if chars.get(i + 1).is_some_and(|&(_, n)| n == '\n') => {
                i += 1;
                col += 1;
            }
            '\n' => {
                tokens.push(Token { tok: Tok::Newline, span: span(line, start_col, 1, offset) });
                i += 1;
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < chars.len() && chars[i].1 != '\n' {
                    i += 1;
                    col += 1;
                }
            }
            '{' | '}' | ';' | ':' | '=' => {
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ';' => Tok::Semi,
                    ':' => Tok::Colon,
                    _ => Tok::Eq,
                };
                tokens.push(Token { tok, span: span(line, start_col, 1, offset) });
                i += 1;
                col += 1;
            }
            c if is_ident_start(c) => {
                let mut j = i;
                while j < chars.len() && is_ident_continue(chars[j].1) {
                    j += 1;
                }
                let end = chars.get(j).map_or(text.len(), |&(o, _)| o);
                tokens.push(Token {
                    tok: Tok::Ident(text[offset..end].to_string()),
                    span: span(line, start_col, j - i, offset),
                });
                col += j - i;
                i = j;
            }
            c if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' => {
                let mut j = i + 1;
                while j < chars.len() {
                    let d = chars[j].1;
                    let exp_sign = (d == '-' || d == '+') && matches!(chars[j - 1].1, 'e' | 'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        j += 1;
                    } else {
                        break;
                    }
                }
                let end = chars.get(j).map_or(text.len(), |&(o, _)| o);
                let lexeme = &text[offset..end];
                let sp = span(line, start_col, j - i, offset);
                match lexeme.parse::<f64>() {
                    Ok(v) if v.is_finite() => tokens.push(Token { tok: Tok::Number(v), span: sp }),
                    _ => diags.push(ParseDiagnostic::new(
                        DiagnosticSeverity::Error,
                        format!("malformed number `{lexeme}`"),
                        sp,
                    )),
                }
                col += j - i;
                i = j;
            }
            other => {
                diags.push(ParseDiagnostic::new(
                    DiagnosticSeverity::Error,
                    format!("unexpected character `{other}`"),
                    span(line, start_col, 1, offset),
                ));
                i += 1;
                col += 1;
            }
        }
    }
    tokens.push(Token { tok: Tok::Eof, span: span(line, col, 0, text.len()) });
    (tokens, diags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_and_positions() {
        let (toks, diags) = lex("node A-b {\r\n  row .5 -1e-3 # c\n}", "t");
        assert!(diags.is_empty());
        let kinds: Vec<Tok> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("node".into()),
                Tok::Ident("A-b".into()),
                Tok::LBrace,
                Tok::Newline,
                Tok::Ident("row".into()),
                Tok::Number(0.5),
                Tok::Number(-1e-3),
                Tok::Newline,
                Tok::RBrace,
                Tok::Eof,
            ]
        );
        assert_eq!((toks[5].span.line, toks[5].span.column, toks[5].span.length), (2, 7, 2));
    }

    #[test]
    fn bad_characters_are_reported() {
        let (_, diags) = lex("node @", "t");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].span.column, 6);
    }
}
