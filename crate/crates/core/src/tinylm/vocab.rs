use std::collections::HashMap;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const SEP: usize = 4;

pub const RESERVED: [&str; 5] = ["<pad>", "<unk>", "<bos>", "<eos>", "<sep>"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::from_tokens(RESERVED.iter().map(|s| s.to_string()).collect())
    }
}

impl Vocab {
    /// Whitespace tokenization; tokens seen at least `min_freq` times get ids in
    /// order of first appearance after the reserved ids.
    pub fn build<S: AsRef<str>>(corpus: &[S], min_freq: usize) -> Vocab {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut order: Vec<&str> = Vec::new();
        for text in corpus {
            for tok in text.as_ref().split_whitespace() {
                let c = counts.entry(tok).or_insert(0);
                if *c == 0 {
                    order.push(tok);
                }
                *c += 1;
            }
        }
        let mut vocab = Vocab::default();
        for tok in order {
            if counts[tok] >= min_freq && !vocab.index.contains_key(tok) {
                vocab.index.insert(tok.to_owned(), vocab.tokens.len());
                vocab.tokens.push(tok.to_owned());
            }
        }
        vocab
    }

    /// Rebuilds a vocabulary from an id-ordered token list whose first five
    /// entries are the reserved tokens.
    pub fn from_tokens(tokens: Vec<String>) -> Vocab {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(RESERVED[UNK], String::as_str)
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        text.split_whitespace().map(|t| self.id(t)).collect()
    }

    /// `BOS prompt SEP`: the model input preceding an answer.
    pub fn encode_prompt(&self, prompt: &str) -> Vec<usize> {
        let mut ids = vec![BOS];
        ids.extend(self.encode(prompt));
        ids.push(SEP);
        ids
    }

    /// `answer EOS`: the teacher-forced target.
    pub fn encode_answer(&self, answer: &str) -> Vec<usize> {
        let mut ids = self.encode(answer);
        ids.push(EOS);
        ids
    }

    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter().map(|&i| self.token(i)).collect::<Vec<_>>().join(" ")
    }
}
