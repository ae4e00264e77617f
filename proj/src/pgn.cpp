#include "pmcts/pgn.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace pmcts {

const char* to_string(GameResult r) {
    switch (r) {
        case GameResult::WhiteWin: return "1-0";
        case GameResult::Draw: return "1/2-1/2";
        case GameResult::BlackWin: return "0-1";
        case GameResult::Unknown: return "*";
    }
    return "*";
}

GameResult result_from_string(std::string_view text) {
    if (text == "1-0") return GameResult::WhiteWin;
    if (text == "0-1") return GameResult::BlackWin;
    if (text == "1/2-1/2") return GameResult::Draw;
    return GameResult::Unknown;
}

GameResult result_from_outcome(Outcome o) {
    switch (o) {
        case Outcome::WhiteWin: return GameResult::WhiteWin;
        case Outcome::BlackWin: return GameResult::BlackWin;
        case Outcome::Draw: return GameResult::Draw;
        case Outcome::Ongoing: return GameResult::Unknown;
    }
    return GameResult::Unknown;
}

std::vector<Position> GameRecord::replay() const {
    std::vector<Position> out;
    out.reserve(moves.size() + 1);
    out.push_back(initial);
    for (const Move& m : moves) out.push_back(out.back().play(m));
    return out;
}

std::optional<int> GameRecord::elo(std::string_view tag) const {
    auto it = tags.find(std::string(tag));
    if (it == tags.end()) return std::nullopt;
    try {
        return std::stoi(it->second);
    } catch (...) {
        return std::nullopt;
    }
}

std::optional<std::string> GameRecord::month() const {
    auto it = tags.find("Date");
    if (it == tags.end()) return std::nullopt;
    const std::string& d = it->second;  // YYYY.MM.DD
    if (d.size() < 7 || !std::isdigit(static_cast<unsigned char>(d[0])) || !std::isdigit(static_cast<unsigned char>(d[5])))
        return std::nullopt;
    return d.substr(0, 4) + "-" + d.substr(5, 2);
}

// ---------------------------------------------------------------------------
// SAN

namespace {

char san_piece_letter(PieceType t) { return "PNBRQK"[index(t)]; }

std::optional<PieceType> piece_from_san_letter(char c) {
    switch (c) {
        case 'N': return PieceType::Knight;
        case 'B': return PieceType::Bishop;
        case 'R': return PieceType::Rook;
        case 'Q': return PieceType::Queen;
        case 'K': return PieceType::King;
        default: return std::nullopt;
    }
}

}  // namespace

std::string to_san(const Position& p, const Move& m) {
    std::string san;
    const Piece moving = p.at(m.from);
    if (m.is_castle()) {
        san = file_of(m.to) == 6 ? "O-O" : "O-O-O";
    } else if (moving.type == PieceType::Pawn) {
        if (m.is_capture()) {
            san += static_cast<char>('a' + file_of(m.from));
            san += 'x';
        }
        san += square_name(m.to);
        if (m.is_promotion()) {
            san += '=';
            san += san_piece_letter(m.promotion);
        }
    } else {
        san += san_piece_letter(moving.type);
        bool ambiguous = false, same_file = false, same_rank = false;
        for (const Move& other : legal_moves(p)) {
            if (other.to != m.to || other.from == m.from || p.at(other.from).type != moving.type) continue;
            ambiguous = true;
            same_file |= file_of(other.from) == file_of(m.from);
            same_rank |= rank_of(other.from) == rank_of(m.from);
        }
        if (ambiguous) {
            if (!same_file) san += static_cast<char>('a' + file_of(m.from));
            else if (!same_rank) san += static_cast<char>('1' + rank_of(m.from));
            else san += square_name(m.from);
        }
        if (m.is_capture()) san += 'x';
        san += square_name(m.to);
    }
    Position next = p.play(m);
    if (next.in_check()) san += legal_moves(next).empty() ? '#' : '+';
    return san;
}

Move parse_san(const Position& p, std::string_view san) {
    std::string text(san);
    while (!text.empty() && (text.back() == '+' || text.back() == '#' || text.back() == '!' || text.back() == '?'))
        text.pop_back();
    if (text.empty()) throw SanError(SanError::Kind::Malformed, "empty move");

    const auto moves = legal_moves(p);
    if (text == "O-O" || text == "0-0" || text == "O-O-O" || text == "0-0-0") {
        const int target_file = text.size() == 3 ? 6 : 2;
        for (const Move& m : moves)
            if (m.is_castle() && file_of(m.to) == target_file) return m;
        throw SanError(SanError::Kind::NoMatch, "castling not legal: " + std::string(san));
    }

    PieceType promotion = PieceType::None;
    if (text.size() >= 3) {
        char last = static_cast<char>(std::toupper(static_cast<unsigned char>(text.back())));
        char before = text[text.size() - 2];
        if ((before == '=' || std::isdigit(static_cast<unsigned char>(before))) &&
            std::string_view("NBRQ").find(last) != std::string_view::npos) {
            promotion = *piece_from_san_letter(last);
            text.pop_back();
            if (text.back() == '=') text.pop_back();
        }
    }
    if (text.size() < 2) throw SanError(SanError::Kind::Malformed, std::string(san));
    auto target = parse_square(std::string_view(text).substr(text.size() - 2));
    if (!target) throw SanError(SanError::Kind::Malformed, std::string(san));
    std::string_view head = std::string_view(text).substr(0, text.size() - 2);

    PieceType type = PieceType::Pawn;
    if (!head.empty() && std::isupper(static_cast<unsigned char>(head.front()))) {
        auto t = piece_from_san_letter(head.front());
        if (!t) throw SanError(SanError::Kind::Malformed, std::string(san));
        type = *t;
        head.remove_prefix(1);
    }
    if (!head.empty() && (head.back() == 'x' || head.back() == ':')) head.remove_suffix(1);
    // Long-form separators ("Ng1-f3") are tolerated.
    std::optional<int> from_file, from_rank;
    for (char c : head) {
        if (c >= 'a' && c <= 'h') from_file = c - 'a';
        else if (c >= '1' && c <= '8') from_rank = c - '1';
        else if (c == '-') continue;
        else throw SanError(SanError::Kind::Malformed, std::string(san));
    }

    const Move* found = nullptr;
    int matches = 0;
    for (const Move& m : moves) {
        if (m.to != *target || p.at(m.from).type != type || m.promotion != promotion) continue;
        if (from_file && file_of(m.from) != *from_file) continue;
        if (from_rank && rank_of(m.from) != *from_rank) continue;
        found = &m;
        ++matches;
    }
    if (matches == 0) throw SanError(SanError::Kind::NoMatch, "no legal move matches '" + std::string(san) + "'");
    if (matches > 1) throw SanError(SanError::Kind::Ambiguous, "ambiguous move '" + std::string(san) + "'");
    return *found;
}

// ---------------------------------------------------------------------------
// PGN reading

namespace {

bool is_tag_line(const std::string& line) {
    auto pos = line.find_first_not_of(" \t\r");
    return pos != std::string::npos && line[pos] == '[';
}

bool is_blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

void parse_tag(std::string_view line, std::map<std::string, std::string>& tags) {
    auto open = line.find('[');
    auto quote = line.find('"', open);
    auto close_quote = line.rfind('"');
    if (open == std::string_view::npos || quote == std::string_view::npos || close_quote <= quote) return;
    std::string name(line.substr(open + 1, quote - open - 1));
    while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) name.pop_back();
    std::string value;
    for (std::size_t i = quote + 1; i < close_quote; ++i) {
        if (line[i] == '\\' && i + 1 < close_quote) ++i;
        value += line[i];
    }
    if (!name.empty()) tags[name] = value;
}

bool is_result_token(std::string_view t) { return t == "1-0" || t == "0-1" || t == "1/2-1/2" || t == "*"; }

// Splits movetext into SAN/result tokens, dropping comments, variations,
// NAGs and move numbers.
std::vector<std::string> tokenize_movetext(std::string_view text) {
    std::vector<std::string> tokens;
    int variation_depth = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (c == '{') {
            auto end = text.find('}', i);
            i = end == std::string_view::npos ? text.size() : end + 1;
        } else if (c == ';') {
            auto end = text.find('\n', i);
            i = end == std::string_view::npos ? text.size() : end + 1;
        } else if (c == '(') {
            ++variation_depth;
            ++i;
        } else if (c == ')') {
            variation_depth = std::max(0, variation_depth - 1);
            ++i;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else {
            std::size_t j = i;
            while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) && text[j] != '{' &&
                   text[j] != '(' && text[j] != ')' && text[j] != ';')
                ++j;
            std::string_view token = text.substr(i, j - i);
            i = j;
            if (variation_depth > 0 || token.front() == '$') continue;
            if (is_result_token(token)) {
                tokens.emplace_back(token);
                continue;
            }
            // Strip a leading move number such as "12." or "12...".
            std::size_t k = 0;
            while (k < token.size() && std::isdigit(static_cast<unsigned char>(token[k]))) ++k;
            if (k > 0 && k < token.size() && token[k] == '.') {
                while (k < token.size() && token[k] == '.') ++k;
                token.remove_prefix(k);
            } else if (k == token.size()) {
                continue;
            }
            if (!token.empty() && token.find_first_not_of('.') != std::string_view::npos) tokens.emplace_back(token);
        }
    }
    return tokens;
}

}  // namespace

std::optional<std::string> PgnReader::read_game_text() {
    std::string text;
    bool seen_movetext = false;
    bool seen_anything = false;
    std::string line;
    while (true) {
        if (has_pending_) {
            line = std::move(pending_line_);
            has_pending_ = false;
        } else if (!std::getline(in_, line)) {
            break;
        }
        if (is_tag_line(line)) {
            if (seen_movetext) {
                pending_line_ = line;
                has_pending_ = true;
                break;
            }
        } else if (!is_blank(line)) {
            seen_movetext = true;
        }
        seen_anything |= !is_blank(line);
        text += line;
        text += '\n';
    }
    if (!seen_anything) return std::nullopt;
    return text;
}

std::optional<GameRecord> PgnReader::next() {
    while (auto text = read_game_text()) {
        const int game_index = game_index_++;
        GameRecord game;
        std::string movetext;
        std::istringstream lines(*text);
        std::string line;
        while (std::getline(lines, line)) {
            if (is_tag_line(line) && movetext.empty()) parse_tag(line, game.tags);
            else movetext += line + "\n";
        }
        try {
            auto fen = game.tags.find("FEN");
            game.initial = fen != game.tags.end() ? parse_fen(fen->second) : Position();
            Position current = game.initial;
            for (const std::string& token : tokenize_movetext(movetext)) {
                if (is_result_token(token)) {
                    game.result = result_from_string(token);
                    break;
                }
                Move m = parse_san(current, token);
                game.moves.push_back(m);
                current = current.play(m);
            }
        } catch (const std::exception& e) {
            skipped_.push_back(PgnSkip{game_index, e.what()});
            continue;
        }
        if (game.result == GameResult::Unknown) {
            auto r = game.tags.find("Result");
            if (r != game.tags.end()) game.result = result_from_string(r->second);
        }
        return game;
    }
    return std::nullopt;
}

PgnParseResult parse_pgn(std::istream& in) {
    PgnReader reader(in);
    PgnParseResult out;
    while (auto game = reader.next()) out.games.push_back(std::move(*game));
    out.skipped = reader.skipped();
    return out;
}

PgnParseResult parse_pgn_string(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_pgn(in);
}

// ---------------------------------------------------------------------------
// PGN writing

void write_pgn(std::ostream& out, const GameRecord& game) {
    static const char* kRoster[] = {"Event", "Site", "Date", "Round", "White", "Black", "Result"};
    auto tags = game.tags;
    tags["Result"] = to_string(game.result);
    const std::string initial_fen = to_fen(game.initial);
    if (initial_fen != kStartFen) {
        tags["SetUp"] = "1";
        tags["FEN"] = initial_fen;
    }
    for (const char* name : kRoster) {
        auto it = tags.find(name);
        out << '[' << name << " \"" << (it != tags.end() ? it->second : "?") << "\"]\n";
        if (it != tags.end()) tags.erase(it);
    }
    for (const auto& [name, value] : tags) out << '[' << name << " \"" << value << "\"]\n";
    out << '\n';

    std::string line;
    auto emit = [&](const std::string& token) {
        if (!line.empty() && line.size() + 1 + token.size() > 79) {
            out << line << '\n';
            line.clear();
        }
        if (!line.empty()) line += ' ';
        line += token;
    };
    Position pos = game.initial;
    for (std::size_t i = 0; i < game.moves.size(); ++i) {
        const Move& m = game.moves[i];
        if (pos.side_to_move() == Color::White) emit(std::to_string(pos.fullmove_number()) + ".");
        else if (i == 0) emit(std::to_string(pos.fullmove_number()) + "...");
        emit(to_san(pos, m));
        if (i < game.comments.size() && !game.comments[i].empty()) emit("{" + game.comments[i] + "}");
        pos = pos.play(m);
    }
    emit(to_string(game.result));
    out << line << "\n\n";
}

}  // namespace pmcts
