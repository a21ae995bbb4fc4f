//! Bundled word lists: conditional markers and coarse word categories.

/// Conditional and sequencing markers, longest first so greedy matching
/// prefers "only if" over "if".
pub const MARKERS: &[&str] = &[
    "on the condition that",
    "provided that",
    "as long as",
    "in case",
    "only if",
    "or else",
    "and then",
    "after that",
    "if",
    "unless",
    "otherwise",
    "else",
    "then",
    "and",
];

/// Words that are verbs or auxiliaries in the imperative/request register
/// typical of assistant queries.
const VERBS: &[&str] = &[
    "add", "allow", "am", "apply", "approve", "are", "arrange", "ask", "be", "block", "book", "bring",
    "buy", "call", "can", "cancel", "change", "charge", "check", "clear", "close", "confirm", "contact",
    "could", "create", "deactivate", "debit", "delete", "deposit", "did", "do", "does", "don't",
    "download", "drop", "email", "enable", "disable", "exceeds", "find", "fix", "freeze", "get", "give",
    "go", "had", "has", "have", "help", "hold", "increase", "inform", "install", "is", "issue", "keep",
    "leave", "let", "like", "list", "lock", "log", "look", "lower", "make", "may", "might", "move",
    "must", "need", "needs", "notify", "open", "order", "pay", "pays", "play", "please", "post", "put",
    "raise", "reach", "read", "recharge", "redeem", "reduce", "refund", "register", "reject",
    "remind", "remove", "renew", "reply", "report", "request", "reschedule", "reserve", "reset",
    "restart", "return", "run", "save", "schedule", "see", "sell", "send", "set", "shall", "share",
    "should", "show", "sign", "start", "stay", "stop", "stops", "submit", "switch", "take", "tell",
    "text", "top", "track", "transfer", "turn", "unblock", "unlock", "update", "upgrade", "use",
    "verify", "wait", "want", "wants", "was", "were", "will", "withdraw", "would", "write",
];

const NOUNS: &[&str] = &[
    "account", "accounts", "address", "alarm", "amount", "app", "appointment", "balance", "bank",
    "bill", "bills", "bonus", "bucks", "card", "cash", "checking", "claim", "connection", "credit",
    "data", "day", "deposit", "doctor", "email", "fee", "flight", "friend", "fund", "funds", "game",
    "home", "hotel", "insurance", "internet", "invoice", "laptop", "limit", "loan", "match", "meeting",
    "message", "money", "month", "mortgage", "network", "number", "order", "password", "payment",
    "phone", "plan", "policy", "premium", "raincoat", "rent", "report", "room", "salary", "saving",
    "savings", "server", "service", "statement", "subscription", "team", "temperature", "ticket",
    "tickets", "today", "tomorrow", "transaction", "week", "wife", "husband",
];

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "my", "your", "his", "her", "their", "our", "its", "this", "that", "these",
    "those", "some", "any", "all", "each", "every", "another", "no",
];

const FUNCTION: &[&str] = &[
    "about", "above", "after", "against", "and", "as", "at", "before", "below", "between", "but",
    "by", "during", "for", "from", "he", "her", "him", "i", "if", "in", "into", "it", "it's", "me",
    "myself", "not", "of", "off", "on", "only", "or", "otherwise", "out", "over", "provided", "she",
    "so", "than", "then", "they", "them", "through", "to", "under", "unless", "until", "up", "us",
    "we", "when", "whether", "while", "with", "within", "without", "you", "yourself", "else", "also",
    "kindly", "yes",
];

/// Coarse syntactic category of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Category {
    Verb,
    Noun,
    Function,
    Number,
    Other,
}

pub fn is_determiner(lower: &str) -> bool {
    DETERMINERS.contains(&lower)
}

pub fn is_number(surface: &str) -> bool {
    let body = surface.trim_start_matches(is_currency_symbol);
    !body.is_empty()
        && body.chars().any(|c| c.is_ascii_digit())
        && body.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | '%' | 'k' | 'K'))
}

pub fn is_currency_symbol(c: char) -> bool {
    matches!(c, '$' | '€' | '£' | '¥' | '₹')
}

/// `$400`, `€5`, and similar.
pub fn is_currency(surface: &str) -> bool {
    surface.starts_with(is_currency_symbol) && is_number(surface)
}

/// Lexicon lookup followed by suffix heuristics. `sentence_initial` disables
/// the capitalized-word-is-a-name rule.
pub fn categorize(surface: &str, sentence_initial: bool) -> Category {
    if is_number(surface) {
        return Category::Number;
    }
    let lower = surface.to_lowercase();
    if VERBS.contains(&lower.as_str()) {
        return Category::Verb;
    }
    if is_determiner(&lower) || FUNCTION.contains(&lower.as_str()) {
        return Category::Function;
    }
    if NOUNS.contains(&lower.as_str()) {
        return Category::Noun;
    }
    if !surface.chars().any(char::is_alphabetic) {
        return Category::Other;
    }
    if lower.ends_with("'s") || lower.ends_with("s'") {
        return Category::Noun;
    }
    if !sentence_initial && surface.chars().next().is_some_and(char::is_uppercase) {
        return Category::Noun;
    }
    const NOUN_SUFFIXES: &[&str] = &["tion", "sion", "ment", "ness", "ance", "ence", "ity", "ship", "ist"];
    if NOUN_SUFFIXES.iter().any(|s| lower.len() > s.len() + 2 && lower.ends_with(s)) {
        return Category::Noun;
    }
    if lower.ends_with("n't") {
        return Category::Verb;
    }
    const VERB_SUFFIXES: &[&str] = &["ize", "ise", "ify", "ate"];
    if VERB_SUFFIXES.iter().any(|s| lower.len() > s.len() + 2 && lower.ends_with(s)) {
        return Category::Verb;
    }
    if lower.len() > 4 && (lower.ends_with("ing") || lower.ends_with("ed")) {
        return Category::Verb;
    }
    Category::Other
}

/// Finds marker phrases in lowercased tokens. Returns `(start, end, marker)`
/// triples, non-overlapping, leftmost-longest.
pub fn find_markers<S: AsRef<str>>(lower: &[S]) -> Vec<(usize, usize, &'static str)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < lower.len() {
        let hit = MARKERS.iter().find_map(|m| {
            let words: Vec<&str> = m.split(' ').collect();
            let end = i + words.len();
            (end <= lower.len() && words.iter().zip(&lower[i..end]).all(|(w, t)| *w == t.as_ref()))
                .then_some((i, end, *m))
        });
        match hit {
            Some(h) => {
                out.push(h);
                i = h.1;
            }
            None => i += 1,
        }
    }
    out
}
