use num_bigint::BigUint;

use crate::ast::SourceLoc;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Nat(BigUint),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Semi,
    Colon,
    Dot,
    Arrow,     // ->
    LArrow,    // <-
    FatArrow,  // =>
    Assign,    // =
    EqEq,
    NotEq,
    Ge,
    Le,
    Gt,
    Lt,
    Plus,
    Minus,
    Star,
    Slash,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Nat(n) => format!("`{n}`"),
            Tok::Eof => "end of input".to_string(),
            t => format!("`{}`", punct(t)),
        }
    }
}

fn punct(t: &Tok) -> &'static str {
    match t {
        Tok::LBrace => "{",
        Tok::RBrace => "}",
        Tok::LParen => "(",
        Tok::RParen => ")",
        Tok::LBrack => "[",
        Tok::RBrack => "]",
        Tok::Comma => ",",
        Tok::Semi => ";",
        Tok::Colon => ":",
        Tok::Dot => ".",
        Tok::Arrow => "->",
        Tok::LArrow => "<-",
        Tok::FatArrow => "=>",
        Tok::Assign => "=",
        Tok::EqEq => "==",
        Tok::NotEq => "!=",
        Tok::Ge => ">=",
        Tok::Le => "<=",
        Tok::Gt => ">",
        Tok::Lt => "<",
        Tok::Plus => "+",
        Tok::Minus => "-",
        Tok::Star => "*",
        Tok::Slash => "/",
        Tok::AndAnd => "&&",
        Tok::OrOr => "||",
        Tok::Bang => "!",
        _ => "?",
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub loc: SourceLoc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub loc: SourceLoc,
    pub message: String,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let peek = |i: usize| chars.get(i).copied();
    while i < chars.len() {
        let c = chars[i];
        let loc = SourceLoc::new(line, col);
        let advance = |n: usize, i: &mut usize, col: &mut u32| {
            *i += n;
            *col += n as u32;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '/' && peek(i + 1) == Some('/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && peek(i + 1) == Some('*') {
            i += 2;
            col += 2;
            loop {
                match peek(i) {
                    None => return Err(LexError { loc, message: "unterminated comment".into() }),
                    Some('*') if peek(i + 1) == Some('/') => {
                        i += 2;
                        col += 2;
                        break;
                    }
                    Some('\n') => {
                        i += 1;
                        line += 1;
                        col = 1;
                    }
                    Some(_) => {
                        i += 1;
                        col += 1;
                    }
                }
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while peek(i).is_some_and(|d| d.is_ascii_digit()) {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            if peek(i).is_some_and(|d| d.is_alphabetic() || d == '_') {
                return Err(LexError { loc, message: format!("malformed number `{text}`") });
            }
            out.push(Token { tok: Tok::Nat(text.parse().expect("digits")), loc });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while peek(i).is_some_and(|d| d.is_alphanumeric() || d == '_') {
                i += 1;
            }
            col += (i - start) as u32;
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), loc });
            continue;
        }
        let two = |a: char, b: char| c == a && peek(i + 1) == Some(b);
        let (tok, n) = if two('-', '>') {
            (Tok::Arrow, 2)
        } else if two('<', '-') {
            (Tok::LArrow, 2)
        } else if two('=', '>') {
            (Tok::FatArrow, 2)
        } else if two('=', '=') {
            (Tok::EqEq, 2)
        } else if two('!', '=') {
            (Tok::NotEq, 2)
        } else if two('>', '=') {
            (Tok::Ge, 2)
        } else if two('<', '=') {
            (Tok::Le, 2)
        } else if two('&', '&') {
            (Tok::AndAnd, 2)
        } else if two('|', '|') {
            (Tok::OrOr, 2)
        } else {
            let t = match c {
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBrack,
                ']' => Tok::RBrack,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                ':' => Tok::Colon,
                '.' => Tok::Dot,
                '=' => Tok::Assign,
                '>' => Tok::Gt,
                '<' => Tok::Lt,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '!' => Tok::Bang,
                other => {
                    return Err(LexError { loc, message: format!("unexpected character `{other}`") })
                }
            };
            (t, 1)
        };
        advance(n, &mut i, &mut col);
        out.push(Token { tok, loc });
    }
    out.push(Token { tok: Tok::Eof, loc: SourceLoc::new(line, col) });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn arrows_and_comparisons() {
        assert_eq!(
            toks("m[k <- v] a -> b => c <= d"),
            vec![
                Tok::Ident("m".into()),
                Tok::LBrack,
                Tok::Ident("k".into()),
                Tok::LArrow,
                Tok::Ident("v".into()),
                Tok::RBrack,
                Tok::Ident("a".into()),
                Tok::Arrow,
                Tok::Ident("b".into()),
                Tok::FatArrow,
                Tok::Ident("c".into()),
                Tok::Le,
                Tok::Ident("d".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn locations_skip_comments() {
        let t = tokenize("// hi\n  /* a\n b */ x").unwrap();
        assert_eq!(t[0].loc, SourceLoc::new(3, 7));
    }

    #[test]
    fn huge_numbers() {
        let n = "115792089237316195423570985008687907853269984665640564039457584007913129639935";
        assert_eq!(toks(n)[0], Tok::Nat(n.parse().unwrap()));
    }

    #[test]
    fn rejects_stray_chars() {
        assert!(tokenize("a # b").is_err());
        assert!(tokenize("12ab").is_err());
    }
}
