//! Built-in intent categories: screen graphs, intent templates and
//! parameter tables.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Edge, Row, ScreenSpec, Tap, UiGraph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    CallContact,
    EditContact,
    SendMessage,
    CreateAlarm,
    AddStockToWatchlist,
    AddContact,
    AddReminder,
    CreateNoteInFolder,
    CreateTimer,
    EnableDoNotDisturb,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::CallContact,
        Category::EditContact,
        Category::SendMessage,
        Category::CreateAlarm,
        Category::AddStockToWatchlist,
        Category::AddContact,
        Category::AddReminder,
        Category::CreateNoteInFolder,
        Category::CreateTimer,
        Category::EnableDoNotDisturb,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Category::CallContact => "call_contact",
            Category::EditContact => "edit_contact",
            Category::SendMessage => "send_message",
            Category::CreateAlarm => "create_alarm",
            Category::AddStockToWatchlist => "add_stock_to_watchlist",
            Category::AddContact => "add_contact",
            Category::AddReminder => "add_reminder",
            Category::CreateNoteInFolder => "create_note_in_folder",
            Category::CreateTimer => "create_timer",
            Category::EnableDoNotDisturb => "enable_do_not_disturb",
        }
    }

    pub fn parse(s: &str) -> Result<Category> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::contract(format!("unknown intent category {s:?}")))
    }

    pub fn index(&self) -> usize {
        Category::ALL.iter().position(|c| c == self).unwrap()
    }

    /// Lexicalised intent with `{slot}` placeholders.
    pub fn intent_template(&self) -> &'static str {
        match self {
            Category::CallContact => "call {name}",
            Category::EditContact => "edit contact {name} phone to {phone}",
            Category::SendMessage => "send message {message} to {name}",
            Category::CreateAlarm => "create alarm for {time}",
            Category::AddStockToWatchlist => "add {ticker} stock to watchlist",
            Category::AddContact => "add contact named {name}",
            Category::AddReminder => "add reminder {task} at {time}",
            Category::CreateNoteInFolder => "create note {note} in folder {folder}",
            Category::CreateTimer => "create timer for {duration}",
            Category::EnableDoNotDisturb => "enable do not disturb until {time}",
        }
    }

    /// Intent with slot values stripped.
    pub fn delexicalized_intent(&self) -> &'static str {
        match self {
            Category::CallContact => "call a contact",
            Category::EditContact => "edit a contact phone number",
            Category::SendMessage => "send a message to a contact",
            Category::CreateAlarm => "create an alarm",
            Category::AddStockToWatchlist => "add a stock to watchlist",
            Category::AddContact => "add a new contact",
            Category::AddReminder => "add a reminder",
            Category::CreateNoteInFolder => "create a note in a folder",
            Category::CreateTimer => "create a timer",
            Category::EnableDoNotDisturb => "enable do not disturb",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Name,
    Phone,
    Message,
    Time,
    Ticker,
    Task,
    Note,
    Folder,
    Duration,
}

impl Slot {
    pub const ALL: [Slot; 9] =
        [Slot::Name, Slot::Phone, Slot::Message, Slot::Time, Slot::Ticker, Slot::Task, Slot::Note, Slot::Folder, Slot::Duration];

    pub fn key(&self) -> &'static str {
        match self {
            Slot::Name => "name",
            Slot::Phone => "phone",
            Slot::Message => "message",
            Slot::Time => "time",
            Slot::Ticker => "ticker",
            Slot::Task => "task",
            Slot::Note => "note",
            Slot::Folder => "folder",
            Slot::Duration => "duration",
        }
    }

    /// Every value the slot can take.
    pub fn table(&self) -> Vec<String> {
        let own = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        match self {
            Slot::Name => own(NAMES),
            Slot::Message => own(MESSAGES),
            Slot::Ticker => own(TICKERS),
            Slot::Task => own(TASKS),
            Slot::Note => own(NOTES),
            Slot::Folder => own(FOLDERS),
            Slot::Phone => (0..10_000).map(|i| format!("555-{i:04}")).collect(),
            Slot::Time => (0..24 * 12).map(|i| format_time(i / 12, (i % 12) * 5)).collect(),
            Slot::Duration => (1..=99)
                .map(|m| if m == 1 { "1 minute".to_string() } else { format!("{m} minutes") })
                .chain((2..=12).map(|h| format!("{h} hours")))
                .collect(),
        }
    }
}

/// `H:MM AM/PM` for a 24-hour clock time.
pub fn format_time(hour: usize, minute: usize) -> String {
    let (h12, half) = match hour {
        0 => (12, "AM"),
        1..=11 => (hour, "AM"),
        12 => (12, "PM"),
        _ => (hour - 12, "PM"),
    };
    format!("{h12}:{minute:02} {half}")
}

const NAMES: &[&str] = &[
    "Ravi", "Maya", "Liam", "Noah", "Emma", "Olivia", "Ava", "Sophia", "Isabella", "Mia", "Amelia", "Harper", "Evelyn",
    "Abigail", "Ella", "Chloe", "Grace", "Zoe", "Nora", "Lily", "Hannah", "Aria", "Leah", "Sara", "Priya", "Anika",
    "Kenji", "Yuki", "Hiro", "Mateo", "Diego", "Lucas", "Ethan", "Mason", "Logan", "Elijah", "Oliver", "Jacob", "Aiden",
    "Samir", "Omar", "Tariq", "Fatima", "Layla", "Noor", "Ines", "Chen", "Wei", "Mei", "Jin", "Arjun", "Kiran", "Dev",
    "Rohan", "Nia", "Zara", "Felix", "Hugo", "Oscar", "Theo",
    "Aaron", "Bella", "Caleb", "Daisy", "Eli", "Fiona", "Gavin", "Hazel", "Ivan", "Jade", "Kai", "Luna", "Milo", "Nina",
    "Owen", "Piper", "Quinn", "Rosa", "Sean", "Tara", "Uma", "Victor", "Wade", "Xena", "Yara", "Zane", "Adam", "Beth",
    "Cora", "Dana", "Ezra", "Faye", "Gus", "Hana", "Iris", "Jack", "Kate", "Leo", "Mila", "Nate", "Opal", "Paul",
    "Rhea", "Seth", "Tess", "Uri", "Vera", "Will", "Yuri", "Zack", "Alma", "Boris", "Clara", "Dmitri", "Elena", "Farah",
    "Greta", "Hamid", "Ingrid", "Jorge",
];

const MESSAGES: &[&str] = &[
    "see you soon", "running late", "on my way", "call me back", "happy birthday", "good morning", "good night",
    "thanks a lot", "where are you", "lunch at noon", "meeting moved", "almost there", "miss you", "got it",
    "sounds good", "be right back", "love you", "at the door", "in a meeting", "text me later", "dinner tonight?",
    "leaving now", "just landed", "what time?", "all done", "nice work", "call you soon", "no worries",
    "running behind", "see you there", "parking now", "home safe", "great news", "one sec", "stuck in traffic",
    "on the train", "need a ride?", "coffee later?", "movie at six", "bring snacks", "good luck", "feel better",
    "happy friday", "well done", "talk tomorrow", "sorry I missed", "free to chat?", "see you at 5",
    "order placed", "got the keys",
];

const TICKERS: &[&str] = &[
    "NVDA", "AMZN", "GOOG", "TSLA", "META", "NFLX", "ADBE", "ORCL", "INTC", "AMD", "IBM", "CSCO", "QCOM", "TXN", "AVGO",
    "CRM", "PYPL", "UBER", "LYFT", "SHOP", "SNAP", "PINS", "SQ", "ZM", "DOCU", "ROKU", "SPOT", "BABA", "JD", "NIO",
    "FORD", "GM", "TM", "HMC", "KO", "PEP", "MCD", "SBUX", "NKE", "DIS", "WMT", "TGT", "COST", "HD", "LOW", "JPM",
    "BAC", "WFC", "GS", "MS", "VISA", "MA", "AXP", "ATT", "VZ", "TMUS", "XOM", "CVX", "BP", "SHEL",
    "ABNB", "ADP", "AIG", "AMAT", "AMGN", "ASML", "BA", "BKNG", "BLK", "BMY", "CAT", "CHTR", "CMCSA", "COP", "CVS", "DE",
    "DHR", "DELL", "EA", "EBAY", "ETSY", "FDX", "GE", "GILD", "HON", "HPQ", "ILMN", "INTU", "ISRG", "KHC", "KR", "LLY",
    "LMT", "LRCX", "MAR", "MDT", "MMM", "MO", "MRK", "MU", "NEE", "NOW", "PANW", "PFE", "PG", "PLTR", "RTX", "SCHW",
    "SO", "SPGI", "TEAM", "TJX", "TTD", "UNH", "UNP", "UPS", "USB", "WBA", "WDAY", "ZS",
];

const TASKS: &[&str] = &[
    "buy milk", "pay rent", "walk dog", "water plants", "pick up kids", "book dentist", "renew passport",
    "send invoice", "clean garage", "buy flowers", "pay bills", "charge phone", "take vitamins", "file taxes",
    "return books", "order pizza", "email boss", "pack lunch", "fix bike", "mow lawn", "buy stamps", "call plumber",
    "feed cat", "wash car", "study notes", "book flight", "buy bread", "vote today", "gym at six", "pay card",
    "buy gift", "call bank", "mail letter", "meal prep", "iron shirts", "clean desk", "backup files", "buy eggs",
    "get haircut", "oil change", "book hotel", "buy coffee", "read report", "trash day", "pick up meds", "bake cake",
    "fold laundry", "plan trip", "update resume", "sign forms",
];

const NOTES: &[&str] = &[
    "grocery list", "trip ideas", "gift ideas", "book list", "movie list", "recipe notes", "meeting notes",
    "packing list", "workout plan", "budget plan", "project ideas", "weekend plans", "garden plan", "reading list",
    "song ideas", "party plan", "travel tips", "work goals", "study plan", "shopping list", "todo today",
    "call notes", "blog ideas", "wish list", "chore list", "date ideas", "menu plan", "class notes", "bug list",
    "app ideas", "quotes", "passwords hint", "car care", "pet care", "home repairs", "birthday list", "habit log",
    "sleep log", "diet notes", "trip budget", "team notes", "lesson plan", "poem draft", "speech draft",
    "paint colors", "camp gear", "ski trip", "bike routes", "tax notes", "wine list",
];

const FOLDERS: &[&str] = &[
    "work", "home", "ideas", "travel", "school", "family", "recipes", "journal", "projects", "personal", "music",
    "books", "garden", "fitness", "finance", "health", "kids", "pets", "car", "house", "shopping", "events", "movies",
    "games", "art", "photos", "writing", "hobbies", "friends", "meetings", "clients", "taxes", "study", "goals",
    "drafts", "archive", "misc", "inbox", "daily", "weekly", "trips", "food", "wedding", "holiday", "college",
    "lectures", "research", "design", "planning", "reading",
];

/// Fill every slot of `slots` from its table.
pub fn sample_params(slots: &[Slot], rng: &mut impl Rng) -> BTreeMap<Slot, String> {
    slots.iter().map(|&s| (s, s.table().choose(rng).unwrap().clone())).collect()
}

/// Replace `{slot}` placeholders.
pub fn fill(template: &str, params: &BTreeMap<Slot, String>) -> String {
    let mut out = template.to_string();
    for (slot, value) in params {
        out = out.replace(&format!("{{{}}}", slot.key()), value);
    }
    out
}

// launcher icon order
const APPS: [(&str, [f32; 3]); 10] = [
    ("PHONE", [0.2, 0.75, 0.3]),
    ("MESSAGES", [0.2, 0.55, 0.95]),
    ("CLOCK", [0.95, 0.55, 0.1]),
    ("STOCKS", [0.35, 0.35, 0.45]),
    ("CONTACTS", [0.6, 0.6, 0.65]),
    ("REMINDERS", [0.9, 0.3, 0.3]),
    ("NOTES", [0.95, 0.85, 0.2]),
    ("SETTINGS", [0.5, 0.5, 0.55]),
    ("CAMERA", [0.25, 0.25, 0.25]),
    ("WEATHER", [0.4, 0.75, 0.95]),
];
const PHONE: usize = 0;
const MESSAGES_APP: usize = 1;
const CLOCK: usize = 2;
const STOCKS: usize = 3;
const CONTACTS: usize = 4;
const REMINDERS: usize = 5;
const NOTES_APP: usize = 6;
const SETTINGS: usize = 7;

const ROW_FILL: [f32; 3] = [0.9, 0.9, 0.92];
const SCREEN_BG: [f32; 3] = [0.97, 0.97, 0.97];

pub fn screen_background() -> [f32; 3] {
    SCREEN_BG
}

fn pastel(c: [f32; 3]) -> [f32; 3] {
    c.map(|v| 0.55 + 0.45 * v)
}

struct Builder {
    vertices: Vec<ScreenSpec>,
    edges: Vec<Edge>,
}

impl Builder {
    fn screen(&mut self, name: &str, app: usize, header: &str, rows: &[&str], keyboard: bool) -> usize {
        self.vertices.push(ScreenSpec {
            name: name.to_string(),
            header: header.to_string(),
            header_fill: pastel(APPS[app].1),
            rows: rows.iter().map(|t| Row { text: t.to_string(), fill: ROW_FILL }).collect(),
            icons: Vec::new(),
            keyboard,
        });
        self.vertices.len() - 1
    }

    fn edge(&mut self, from: usize, to: usize, label: &str, tap: Tap, slots: &[Slot]) {
        self.edges.push(Edge { from, to, label: label.to_string(), tap, slots: slots.to_vec(), detour: false });
    }

    fn home(&mut self) -> usize {
        self.vertices.push(ScreenSpec {
            name: "home".into(),
            header: "HOME".into(),
            header_fill: [0.85, 0.85, 0.9],
            rows: Vec::new(),
            icons: APPS.iter().map(|a| a.1).collect(),
            keyboard: false,
        });
        self.vertices.len() - 1
    }

    /// Home -> global search -> typed app name -> `target`.
    fn via_search(&mut self, home: usize, app: usize, target: usize) {
        let s = self.screen("search", 7, "SEARCH", &[], true);
        let typed = self.screen("search_typed", 7, "SEARCH", &[APPS[app].0], true);
        self.edge(home, s, "swipe down to search", Tap::Header, &[]);
        self.edge(s, typed, &format!("type {}", APPS[app].0.to_lowercase()), Tap::Keyboard, &[]);
        self.edge(typed, target, "open search result", Tap::Row(0), &[]);
    }

    fn control_center(&mut self, home: usize) -> usize {
        let c = self.screen("control_center", 7, "CONTROL", &["ALARM", "TIMER", "DND"], false);
        self.edge(home, c, "swipe up control center", Tap::Header, &[]);
        c
    }
}

const DISTRACTORS: [(&str, usize, &str, [&str; 2]); 5] = [
    ("camera", 8, "CAMERA", ["PHOTO", "VIDEO"]),
    ("weather", 9, "WEATHER", ["SUNNY", "72 F"]),
    ("photos", 8, "PHOTOS", ["ALBUMS", "RECENT"]),
    ("music", 1, "MUSIC", ["PLAY", "SHUFFLE"]),
    ("maps", 9, "MAPS", ["SEARCH", "DRIVE"]),
];

/// Screen graph for `category`, with two randomly chosen distractor screens
/// reachable from every non-goal screen.
pub fn build_graph(category: Category, rng: &mut impl Rng) -> Result<UiGraph> {
    use Slot::*;
    let mut b = Builder { vertices: Vec::new(), edges: Vec::new() };
    let home = b.home();
    let goal = match category {
        Category::CallContact => {
            let recents = b.screen("recents", PHONE, "RECENTS", &["{name}", "MOM", "CONTACTS"], false);
            let contacts = b.screen("contacts", CONTACTS, "CONTACTS", &["ALEX", "{name}", "SAM"], false);
            let card = b.screen("contact_card", CONTACTS, "CONTACT", &["{name}", "MOBILE", "CALL"], false);
            let calling = b.screen("calling", PHONE, "CALLING", &["{name}", "MOBILE"], false);
            b.edge(home, recents, "open phone", Tap::Icon(PHONE), &[]);
            b.edge(home, contacts, "open contacts", Tap::Icon(CONTACTS), &[]);
            b.edge(recents, calling, "tap recent {name}", Tap::Row(0), &[Name]);
            b.edge(recents, contacts, "open contacts tab", Tap::Row(2), &[]);
            b.edge(contacts, card, "tap {name}", Tap::Row(1), &[Name]);
            b.edge(card, calling, "tap call", Tap::Row(2), &[]);
            b.via_search(home, PHONE, recents);
            calling
        }
        Category::EditContact => {
            let recents = b.screen("recents", PHONE, "RECENTS", &["MOM", "CONTACTS"], false);
            let contacts = b.screen("contacts", CONTACTS, "CONTACTS", &["ALEX", "{name}", "SAM"], false);
            let card = b.screen("contact_card", CONTACTS, "CONTACT", &["{name}", "EDIT"], false);
            let edit = b.screen("edit", CONTACTS, "EDIT", &["{name}", "PHONE"], true);
            let typed = b.screen("edit_typed", CONTACTS, "EDIT", &["{name}", "{phone}", "DONE"], true);
            let saved = b.screen("updated", CONTACTS, "CONTACT", &["{name}", "{phone}", "UPDATED"], false);
            b.edge(home, contacts, "open contacts", Tap::Icon(CONTACTS), &[]);
            b.edge(home, recents, "open phone", Tap::Icon(PHONE), &[]);
            b.edge(recents, contacts, "open contacts tab", Tap::Row(1), &[]);
            b.edge(contacts, card, "tap {name}", Tap::Row(1), &[Name]);
            b.edge(card, edit, "tap edit", Tap::Row(1), &[]);
            b.edge(edit, typed, "type {phone}", Tap::Keyboard, &[Phone]);
            b.edge(typed, saved, "tap done", Tap::Row(2), &[]);
            b.via_search(home, CONTACTS, contacts);
            saved
        }
        Category::SendMessage => {
            let threads = b.screen("threads", MESSAGES_APP, "MESSAGES", &["{name}", "MOM", "NEW"], false);
            let new = b.screen("new_message", MESSAGES_APP, "NEW MSG", &["TO:"], true);
            let new_to = b.screen("new_message_to", MESSAGES_APP, "NEW MSG", &["TO: {name}"], true);
            let thread = b.screen("thread", MESSAGES_APP, "{name}", &[], true);
            let typed = b.screen("thread_typed", MESSAGES_APP, "{name}", &["{message}"], true);
            let sent = b.screen("sent", MESSAGES_APP, "{name}", &["{message}", "SENT"], false);
            b.edge(home, threads, "open messages", Tap::Icon(MESSAGES_APP), &[]);
            b.edge(threads, thread, "tap thread {name}", Tap::Row(0), &[Name]);
            b.edge(threads, new, "tap new", Tap::Row(2), &[]);
            b.edge(new, new_to, "type {name}", Tap::Keyboard, &[Name]);
            b.edge(new_to, thread, "select {name}", Tap::Row(0), &[Name]);
            b.edge(thread, typed, "type {message}", Tap::Keyboard, &[Message]);
            b.edge(typed, sent, "tap send", Tap::Keyboard, &[]);
            b.via_search(home, MESSAGES_APP, threads);
            sent
        }
        Category::CreateAlarm => {
            let clock = b.screen("clock", CLOCK, "CLOCK", &["ALARM", "TIMER", "WORLD"], false);
            let alarms = b.screen("alarms", CLOCK, "ALARMS", &["6:00 AM", "ADD"], false);
            let new = b.screen("new_alarm", CLOCK, "NEW ALARM", &["SET TIME"], false);
            let picked = b.screen("alarm_picked", CLOCK, "NEW ALARM", &["{time}", "SAVE"], false);
            let done = b.screen("alarm_saved", CLOCK, "ALARMS", &["6:00 AM", "{time}", "ON"], false);
            let control = b.control_center(home);
            b.edge(home, clock, "open clock", Tap::Icon(CLOCK), &[]);
            b.edge(clock, alarms, "tap alarm tab", Tap::Row(0), &[]);
            b.edge(control, alarms, "tap alarm", Tap::Row(0), &[]);
            b.edge(alarms, new, "tap add", Tap::Row(1), &[]);
            b.edge(new, picked, "set time {time}", Tap::Row(0), &[Time]);
            b.edge(picked, done, "tap save", Tap::Row(1), &[]);
            b.via_search(home, CLOCK, clock);
            done
        }
        Category::AddStockToWatchlist => {
            let watch = b.screen("watchlist", STOCKS, "STOCKS", &["AAPL", "MSFT", "SEARCH"], false);
            let search = b.screen("stock_search", STOCKS, "SEARCH", &[], true);
            let result = b.screen("stock_result", STOCKS, "SEARCH", &["{ticker}"], true);
            let detail = b.screen("stock_detail", STOCKS, "{ticker}", &["PRICE", "ADD"], false);
            let done = b.screen("watchlist_added", STOCKS, "WATCHLIST", &["AAPL", "MSFT", "{ticker}", "ADDED"], false);
            b.edge(home, watch, "open stocks", Tap::Icon(STOCKS), &[]);
            b.edge(watch, search, "tap search", Tap::Row(2), &[]);
            b.edge(search, result, "type {ticker}", Tap::Keyboard, &[Ticker]);
            b.edge(result, detail, "open {ticker}", Tap::Row(0), &[Ticker]);
            b.edge(detail, done, "tap add", Tap::Row(1), &[]);
            let global = b.screen("search", 7, "SEARCH", &[], true);
            let global_typed = b.screen("search_typed", 7, "SEARCH", &["{ticker}"], true);
            b.edge(home, global, "swipe down to search", Tap::Header, &[]);
            b.edge(global, global_typed, "type {ticker}", Tap::Keyboard, &[Ticker]);
            b.edge(global_typed, detail, "open {ticker}", Tap::Row(0), &[Ticker]);
            done
        }
        Category::AddContact => {
            let recents = b.screen("recents", PHONE, "RECENTS", &["MOM", "CONTACTS"], false);
            let contacts = b.screen("contacts", CONTACTS, "CONTACTS", &["ALEX", "SAM", "NEW"], false);
            let form = b.screen("new_contact", CONTACTS, "NEW", &["NAME"], true);
            let typed = b.screen("new_contact_typed", CONTACTS, "NEW", &["{name}", "DONE"], true);
            let saved = b.screen("contact_saved", CONTACTS, "CONTACT", &["{name}", "SAVED"], false);
            b.edge(home, contacts, "open contacts", Tap::Icon(CONTACTS), &[]);
            b.edge(home, recents, "open phone", Tap::Icon(PHONE), &[]);
            b.edge(recents, contacts, "open contacts tab", Tap::Row(1), &[]);
            b.edge(contacts, form, "tap new", Tap::Row(2), &[]);
            b.edge(form, typed, "type {name}", Tap::Keyboard, &[Name]);
            b.edge(typed, saved, "tap done", Tap::Row(1), &[]);
            b.via_search(home, CONTACTS, contacts);
            saved
        }
        Category::AddReminder => {
            let list = b.screen("reminders", REMINDERS, "REMINDERS", &["CALL MOM", "NEW"], false);
            let form = b.screen("new_reminder", REMINDERS, "NEW", &["TITLE"], true);
            let typed = b.screen("new_reminder_typed", REMINDERS, "NEW", &["{task}", "SET TIME"], true);
            let timed = b.screen("reminder_timed", REMINDERS, "NEW", &["{task}", "{time}", "SAVE"], false);
            let done = b.screen("reminder_saved", REMINDERS, "REMINDERS", &["CALL MOM", "{task}", "{time}"], false);
            b.edge(home, list, "open reminders", Tap::Icon(REMINDERS), &[]);
            b.edge(list, form, "tap new", Tap::Row(1), &[]);
            b.edge(form, typed, "type {task}", Tap::Keyboard, &[Task]);
            b.edge(typed, timed, "set time {time}", Tap::Row(1), &[Time]);
            b.edge(timed, done, "tap save", Tap::Row(2), &[]);
            b.via_search(home, REMINDERS, list);
            done
        }
        Category::CreateNoteInFolder => {
            let folders = b.screen("folders", NOTES_APP, "FOLDERS", &["NOTES", "{folder}"], false);
            let folder = b.screen("folder", NOTES_APP, "{folder}", &["NEW NOTE"], false);
            let editor = b.screen("editor", NOTES_APP, "{folder}", &[], true);
            let typed = b.screen("editor_typed", NOTES_APP, "{folder}", &["{note}", "DONE"], true);
            let saved = b.screen("note_saved", NOTES_APP, "{folder}", &["{note}", "SAVED"], false);
            b.edge(home, folders, "open notes", Tap::Icon(NOTES_APP), &[]);
            b.edge(folders, folder, "open folder {folder}", Tap::Row(1), &[Folder]);
            b.edge(folder, editor, "tap new note", Tap::Row(0), &[]);
            b.edge(editor, typed, "type {note}", Tap::Keyboard, &[Note]);
            b.edge(typed, saved, "tap done", Tap::Row(1), &[]);
            b.via_search(home, NOTES_APP, folders);
            saved
        }
        Category::CreateTimer => {
            let clock = b.screen("clock", CLOCK, "CLOCK", &["ALARM", "TIMER", "WORLD"], false);
            let timer = b.screen("timer", CLOCK, "TIMER", &["SET"], false);
            let set = b.screen("timer_set", CLOCK, "TIMER", &["{duration}", "START"], false);
            let running = b.screen("timer_running", CLOCK, "TIMER", &["{duration}", "RUNNING"], false);
            let control = b.control_center(home);
            b.edge(home, clock, "open clock", Tap::Icon(CLOCK), &[]);
            b.edge(clock, timer, "tap timer tab", Tap::Row(1), &[]);
            b.edge(control, timer, "tap timer", Tap::Row(1), &[]);
            b.edge(timer, set, "set duration {duration}", Tap::Row(0), &[Duration]);
            b.edge(set, running, "tap start", Tap::Row(1), &[]);
            running
        }
        Category::EnableDoNotDisturb => {
            let settings = b.screen("settings", SETTINGS, "SETTINGS", &["WI-FI", "FOCUS", "SOUND"], false);
            let focus = b.screen("focus", SETTINGS, "FOCUS", &["DND", "SLEEP"], false);
            let dnd = b.screen("dnd", SETTINGS, "DND", &["OFF", "UNTIL"], false);
            let timed = b.screen("dnd_timed", SETTINGS, "DND", &["OFF", "UNTIL {time}"], false);
            let on = b.screen("dnd_on", SETTINGS, "DND", &["ON", "UNTIL {time}"], false);
            let control = b.control_center(home);
            b.edge(home, settings, "open settings", Tap::Icon(SETTINGS), &[]);
            b.edge(settings, focus, "tap focus", Tap::Row(1), &[]);
            b.edge(focus, dnd, "tap dnd", Tap::Row(0), &[]);
            b.edge(control, dnd, "long press dnd", Tap::Row(2), &[]);
            b.edge(dnd, timed, "set until {time}", Tap::Row(1), &[Time]);
            b.edge(timed, on, "toggle on", Tap::Row(0), &[]);
            on
        }
    };

    // distractor detours
    let core = b.vertices.len();
    let picks: Vec<_> = DISTRACTORS.choose_multiple(rng, 2).cloned().collect();
    for (name, app, header, rows) in picks {
        let d = b.screen(name, app, header, &rows, false);
        for v in (0..core).filter(|&v| v != goal) {
            b.edges.push(Edge {
                from: v,
                to: d,
                label: format!("open {name}"),
                tap: Tap::Header,
                slots: vec![],
                detour: true,
            });
            b.edges.push(Edge { from: d, to: v, label: "go back".into(), tap: Tap::Header, slots: vec![], detour: true });
        }
    }

    let template = category.intent_template();
    let slots = Slot::ALL.into_iter().filter(|s| template.contains(&format!("{{{}}}", s.key()))).collect();
    let g = UiGraph {
        category,
        vertices: b.vertices,
        edges: b.edges,
        start: home,
        goal,
        intent_template: template.to_string(),
        slots,
    };
    g.validate()?;
    Ok(g)
}
