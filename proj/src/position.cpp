#include "pmcts/position.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <sstream>

namespace pmcts {

namespace {

// ---------------------------------------------------------------------------
// Attack tables

enum Direction { North, East, NorthEast, NorthWest, South, West, SouthEast, SouthWest };

constexpr int kDirFile[8] = {0, 1, 1, -1, 0, -1, 1, -1};
constexpr int kDirRank[8] = {1, 0, 1, 1, -1, 0, -1, -1};

struct Tables {
    std::array<Bitboard, 64> knight{};
    std::array<Bitboard, 64> king{};
    std::array<std::array<Bitboard, 64>, 2> pawn{};  // squares attacked by a pawn of color c on s
    std::array<std::array<Bitboard, 64>, 8> ray{};
    std::array<std::uint8_t, 64> castle_mask{};
    std::array<std::array<std::uint64_t, 64>, 12> zobrist_piece{};
    std::array<std::uint64_t, 16> zobrist_castle{};
    std::array<std::uint64_t, 8> zobrist_ep{};
    std::uint64_t zobrist_side = 0;

    Tables() {
        auto on_board = [](int f, int r) { return f >= 0 && f < 8 && r >= 0 && r < 8; };
        for (int s = 0; s < 64; ++s) {
            int f = s & 7, r = s >> 3;
            const int kn[8][2] = {{1, 2}, {2, 1}, {2, -1}, {1, -2}, {-1, -2}, {-2, -1}, {-2, 1}, {-1, 2}};
            for (auto& d : kn)
                if (on_board(f + d[0], r + d[1])) knight[s] |= bit(make_square(f + d[0], r + d[1]));
            for (int df = -1; df <= 1; ++df)
                for (int dr = -1; dr <= 1; ++dr)
                    if ((df || dr) && on_board(f + df, r + dr)) king[s] |= bit(make_square(f + df, r + dr));
            for (int df : {-1, 1}) {
                if (on_board(f + df, r + 1)) pawn[0][s] |= bit(make_square(f + df, r + 1));
                if (on_board(f + df, r - 1)) pawn[1][s] |= bit(make_square(f + df, r - 1));
            }
            for (int d = 0; d < 8; ++d) {
                int ff = f + kDirFile[d], rr = r + kDirRank[d];
                while (on_board(ff, rr)) {
                    ray[d][s] |= bit(make_square(ff, rr));
                    ff += kDirFile[d];
                    rr += kDirRank[d];
                }
            }
        }
        castle_mask.fill(0xF);
        castle_mask[make_square(4, 0)] &= ~(castling::WhiteKing | castling::WhiteQueen);
        castle_mask[make_square(7, 0)] &= ~castling::WhiteKing;
        castle_mask[make_square(0, 0)] &= ~castling::WhiteQueen;
        castle_mask[make_square(4, 7)] &= ~(castling::BlackKing | castling::BlackQueen);
        castle_mask[make_square(7, 7)] &= ~castling::BlackKing;
        castle_mask[make_square(0, 7)] &= ~castling::BlackQueen;

        std::uint64_t state = 0x9E3779B97F4A7C15ULL;
        auto next = [&state] {
            std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
            return z ^ (z >> 31);
        };
        for (auto& table : zobrist_piece)
            for (auto& v : table) v = next();
        for (auto& v : zobrist_castle) v = next();
        for (auto& v : zobrist_ep) v = next();
        zobrist_side = next();
    }
};

const Tables& tables() {
    static const Tables t;
    return t;
}

Bitboard slide(int dir, Square s, Bitboard occ) {
    const auto& t = tables();
    Bitboard attacks = t.ray[dir][s];
    Bitboard blockers = attacks & occ;
    if (blockers) {
        Square b = dir < South ? lsb(blockers) : msb(blockers);
        attacks ^= t.ray[dir][b];
    }
    return attacks;
}

Bitboard rook_attacks(Square s, Bitboard occ) {
    return slide(North, s, occ) | slide(East, s, occ) | slide(South, s, occ) | slide(West, s, occ);
}

Bitboard bishop_attacks(Square s, Bitboard occ) {
    return slide(NorthEast, s, occ) | slide(NorthWest, s, occ) | slide(SouthEast, s, occ) |
           slide(SouthWest, s, occ);
}

int zobrist_index(Piece p) { return index(p.color) * 6 + index(p.type); }

constexpr PieceType kPromotions[4] = {PieceType::Knight, PieceType::Bishop, PieceType::Rook, PieceType::Queen};

}  // namespace

namespace attacks {
Bitboard knight(Square s) { return tables().knight[s]; }
Bitboard king(Square s) { return tables().king[s]; }
Bitboard pawn(Color c, Square s) { return tables().pawn[index(c)][s]; }
Bitboard bishop(Square s, Bitboard occupancy) { return bishop_attacks(s, occupancy); }
Bitboard rook(Square s, Bitboard occupancy) { return rook_attacks(s, occupancy); }
}  // namespace attacks

// ---------------------------------------------------------------------------
// Small helpers from types.hpp

std::string square_name(Square s) {
    return {static_cast<char>('a' + file_of(s)), static_cast<char>('1' + rank_of(s))};
}

std::optional<Square> parse_square(std::string_view text) {
    if (text.size() != 2 || text[0] < 'a' || text[0] > 'h' || text[1] < '1' || text[1] > '8') return std::nullopt;
    return make_square(text[0] - 'a', text[1] - '1');
}

char piece_char(Piece p) {
    static constexpr char kChars[] = "pnbrqk";
    if (p.empty()) return '.';
    char c = kChars[index(p.type)];
    return p.color == Color::White ? static_cast<char>(c - 'a' + 'A') : c;
}

std::optional<Piece> piece_from_char(char c) {
    static constexpr std::string_view kChars = "pnbrqk";
    Color color = (c >= 'A' && c <= 'Z') ? Color::White : Color::Black;
    char lower = static_cast<char>(color == Color::White ? c - 'A' + 'a' : c);
    auto pos = kChars.find(lower);
    if (pos == std::string_view::npos) return std::nullopt;
    return Piece{color, static_cast<PieceType>(pos)};
}

std::string Move::uci() const {
    std::string s = square_name(from) + square_name(to);
    if (is_promotion()) s += "nbrq"[index(promotion) - 1];
    return s;
}

std::optional<Move> parse_uci_move(std::string_view text) {
    if (text.size() != 4 && text.size() != 5) return std::nullopt;
    auto from = parse_square(text.substr(0, 2));
    auto to = parse_square(text.substr(2, 2));
    if (!from || !to) return std::nullopt;
    Move m{*from, *to};
    if (text.size() == 5) {
        switch (text[4]) {
            case 'n': m.promotion = PieceType::Knight; break;
            case 'b': m.promotion = PieceType::Bishop; break;
            case 'r': m.promotion = PieceType::Rook; break;
            case 'q': m.promotion = PieceType::Queen; break;
            default: return std::nullopt;
        }
    }
    return m;
}

const char* to_string(FenErrorKind kind) {
    switch (kind) {
        case FenErrorKind::FieldCount: return "malformed field count";
        case FenErrorKind::RankOverflow: return "rank overflow";
        case FenErrorKind::RankCount: return "wrong rank count";
        case FenErrorKind::BadPieceChar: return "illegal piece character";
        case FenErrorKind::KingCount: return "king count";
        case FenErrorKind::BadSideToMove: return "invalid side to move";
        case FenErrorKind::BadCastling: return "invalid castling rights";
        case FenErrorKind::BadEnPassant: return "invalid en-passant square";
        case FenErrorKind::BadCounter: return "invalid move counter";
    }
    return "?";
}

const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::Ongoing: return "*";
        case Outcome::WhiteWin: return "1-0";
        case Outcome::BlackWin: return "0-1";
        case Outcome::Draw: return "1/2-1/2";
    }
    return "*";
}

// ---------------------------------------------------------------------------
// Board

void Board::put(Square s, Piece p) {
    squares[s] = p;
    by_type[index(p.type)] |= bit(s);
    by_color[index(p.color)] |= bit(s);
}

void Board::remove(Square s) {
    Piece p = squares[s];
    if (p.empty()) return;
    by_type[index(p.type)] &= ~bit(s);
    by_color[index(p.color)] &= ~bit(s);
    squares[s] = Piece{};
}

Bitboard Board::attackers(Square s, Color by, Bitboard occ) const {
    const auto& t = tables();
    Bitboard them = pieces(by);
    Bitboard diag = (pieces(PieceType::Bishop) | pieces(PieceType::Queen)) & them;
    Bitboard line = (pieces(PieceType::Rook) | pieces(PieceType::Queen)) & them;
    return (t.pawn[index(~by)][s] & pieces(by, PieceType::Pawn)) | (t.knight[s] & pieces(by, PieceType::Knight)) |
           (t.king[s] & pieces(by, PieceType::King)) | (bishop_attacks(s, occ) & diag) | (rook_attacks(s, occ) & line);
}

bool Board::attacked(Square s, Color by) const { return attackers(s, by, occupied()) != 0; }

Bitboard Board::checkers() const {
    return attackers(king_square(side_to_move), ~side_to_move, occupied());
}

void Board::generate_pseudo(MoveList& out) const {
    const auto& t = tables();
    const Color us = side_to_move;
    const Color them = ~us;
    const Bitboard own = pieces(us);
    const Bitboard enemy = pieces(them);
    const Bitboard occ = own | enemy;
    const int forward = us == Color::White ? 8 : -8;
    const int promo_rank = us == Color::White ? 7 : 0;
    const int start_rank = us == Color::White ? 1 : 6;

    auto add_pawn_move = [&](Square from, Square to, std::uint8_t flags) {
        if (rank_of(to) == promo_rank) {
            for (PieceType p : kPromotions) out.push(Move{from, to, p, flags});
        } else {
            out.push(Move{from, to, PieceType::None, flags});
        }
    };

    Bitboard pawns = pieces(us, PieceType::Pawn);
    while (pawns) {
        Square from = pop_lsb(pawns);
        Square one = static_cast<Square>(from + forward);
        if (!(occ & bit(one))) {
            add_pawn_move(from, one, Move::Quiet);
            Square two = static_cast<Square>(one + forward);
            if (rank_of(from) == start_rank && !(occ & bit(two))) out.push(Move{from, two, PieceType::None, Move::DoublePush});
        }
        Bitboard caps = t.pawn[index(us)][from] & enemy;
        while (caps) add_pawn_move(from, pop_lsb(caps), Move::Capture);
        if (en_passant && (t.pawn[index(us)][from] & bit(*en_passant)))
            out.push(Move{from, *en_passant, PieceType::None, Move::Capture | Move::EnPassant});
    }

    auto add_targets = [&](Square from, Bitboard targets) {
        targets &= ~own;
        while (targets) {
            Square to = pop_lsb(targets);
            out.push(Move{from, to, PieceType::None, (enemy & bit(to)) ? Move::Capture : Move::Quiet});
        }
    };

    for (Bitboard b = pieces(us, PieceType::Knight); b;) {
        Square s = pop_lsb(b);
        add_targets(s, t.knight[s]);
    }
    for (Bitboard b = pieces(us, PieceType::Bishop); b;) {
        Square s = pop_lsb(b);
        add_targets(s, bishop_attacks(s, occ));
    }
    for (Bitboard b = pieces(us, PieceType::Rook); b;) {
        Square s = pop_lsb(b);
        add_targets(s, rook_attacks(s, occ));
    }
    for (Bitboard b = pieces(us, PieceType::Queen); b;) {
        Square s = pop_lsb(b);
        add_targets(s, rook_attacks(s, occ) | bishop_attacks(s, occ));
    }
    const Square ksq = king_square(us);
    add_targets(ksq, t.king[ksq]);

    // Castling: path empty, king not in check and not passing through attacked squares.
    const int home = us == Color::White ? 0 : 7;
    const std::uint8_t king_right = us == Color::White ? castling::WhiteKing : castling::BlackKing;
    const std::uint8_t queen_right = us == Color::White ? castling::WhiteQueen : castling::BlackQueen;
    if ((castling & (king_right | queen_right)) && ksq == make_square(4, home) && !attacked(ksq, them)) {
        if ((castling & king_right) && !(occ & (bit(make_square(5, home)) | bit(make_square(6, home)))) &&
            !attacked(make_square(5, home), them) && !attacked(make_square(6, home), them))
            out.push(Move{ksq, make_square(6, home), PieceType::None, Move::Castle});
        if ((castling & queen_right) &&
            !(occ & (bit(make_square(1, home)) | bit(make_square(2, home)) | bit(make_square(3, home)))) &&
            !attacked(make_square(3, home), them) && !attacked(make_square(2, home), them))
            out.push(Move{ksq, make_square(2, home), PieceType::None, Move::Castle});
    }
}

void Board::generate_legal(MoveList& out) const {
    MoveList pseudo;
    generate_pseudo(pseudo);
    const Color us = side_to_move;
    for (const Move& m : pseudo) {
        Board next = *this;
        next.make(m);
        if (!next.attacked(next.king_square(us), ~us)) out.push(m);
    }
}

void Board::make(const Move& m) {
    const auto& t = tables();
    const Color us = side_to_move;
    const Piece moving = squares[m.from];

    ++halfmove_clock;
    if (moving.type == PieceType::Pawn || m.is_capture()) halfmove_clock = 0;

    if (m.is_en_passant()) {
        remove(static_cast<Square>(m.to + (us == Color::White ? -8 : 8)));
    } else if (!squares[m.to].empty()) {
        remove(m.to);
    }
    remove(m.from);
    put(m.to, m.is_promotion() ? Piece{us, m.promotion} : moving);

    if (m.is_castle()) {
        const int home = rank_of(m.from);
        const bool king_side = file_of(m.to) == 6;
        Square rook_from = make_square(king_side ? 7 : 0, home);
        Square rook_to = make_square(king_side ? 5 : 3, home);
        Piece rook = squares[rook_from];
        remove(rook_from);
        put(rook_to, rook);
    }

    castling &= t.castle_mask[m.from] & t.castle_mask[m.to];
    en_passant.reset();
    if (moving.type == PieceType::Pawn && std::abs(m.to - m.from) == 16)
        en_passant = static_cast<Square>((m.from + m.to) / 2);

    if (us == Color::Black) ++fullmove_number;
    side_to_move = ~us;
}

std::uint64_t Board::compute_hash() const {
    const auto& t = tables();
    std::uint64_t h = 0;
    for (Bitboard b = occupied(); b;) {
        Square s = pop_lsb(b);
        h ^= t.zobrist_piece[zobrist_index(squares[s])][s];
    }
    h ^= t.zobrist_castle[castling];
    // The en-passant square only distinguishes positions when a capture is
    // actually available to the side to move.
    if (en_passant && (t.pawn[index(~side_to_move)][*en_passant] & pieces(side_to_move, PieceType::Pawn)))
        h ^= t.zobrist_ep[file_of(*en_passant)];
    if (side_to_move == Color::Black) h ^= t.zobrist_side;
    return h;
}

bool insufficient_material(const Board& b) {
    if (b.pieces(PieceType::Pawn) | b.pieces(PieceType::Rook) | b.pieces(PieceType::Queen)) return false;
    Bitboard minors = b.pieces(PieceType::Knight) | b.pieces(PieceType::Bishop);
    if (popcount(minors) <= 1) return true;
    if (b.pieces(PieceType::Knight)) return false;
    Bitboard bishops = b.pieces(PieceType::Bishop);
    return (bishops & kDarkSquares) == 0 || (bishops & ~kDarkSquares) == 0;
}

// ---------------------------------------------------------------------------
// Position

Position::Position() : Position(parse_fen(kStartFen)) {}

Position::Position(const Board& board) : board_(board) {
    board_.hash = board_.compute_hash();
    line_ = std::make_shared<const HashLine>(HashLine{board_.hash, nullptr});
}

Position Position::from_board(const Board& board) { return Position(board); }

Position Position::play(const Move& m) const {
    Position next = *this;
    next.board_.make(m);
    next.board_.hash = next.board_.compute_hash();

    for (int i = kHistoryLength - 1; i > 0; --i) next.history_[i] = next.history_[i - 1];
    next.history_[0] = m;
    next.history_size_ = std::min(history_size_ + 1, kHistoryLength);
    ++next.game_ply_;

    if (next.board_.halfmove_clock == 0) {
        next.line_ = std::make_shared<const HashLine>(HashLine{next.board_.hash, nullptr});
        next.repetitions_ = 1;
    } else {
        next.line_ = std::make_shared<const HashLine>(HashLine{next.board_.hash, line_});
        int count = 0;
        for (const HashLine* node = next.line_.get(); node; node = node->prev.get())
            if (node->hash == next.board_.hash) ++count;
        next.repetitions_ = count;
    }
    return next;
}

Position color_flip(const Position& p) {
    Board b;
    for (Square s = 0; s < 64; ++s) {
        Piece piece = p.board_.at(s);
        if (!piece.empty()) b.put(mirror(s), Piece{~piece.color, piece.type});
    }
    b.side_to_move = ~p.board_.side_to_move;
    std::uint8_t c = p.board_.castling;
    b.castling = static_cast<std::uint8_t>(((c & 3) << 2) | ((c >> 2) & 3));
    if (p.board_.en_passant) b.en_passant = mirror(*p.board_.en_passant);
    b.halfmove_clock = p.board_.halfmove_clock;
    b.fullmove_number = p.board_.fullmove_number;

    Position out = Position::from_board(b);
    for (int i = 0; i < p.history_size_; ++i) {
        Move m = p.history_[i];
        m.from = mirror(m.from);
        m.to = mirror(m.to);
        out.history_[i] = m;
    }
    out.history_size_ = p.history_size_;
    out.repetitions_ = p.repetitions_;
    return out;
}

// ---------------------------------------------------------------------------
// FEN

namespace {

std::vector<std::string_view> split_fields(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) out.push_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

int parse_counter(std::string_view field, int min_value) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size() || value < min_value)
        throw FenError(FenErrorKind::BadCounter, std::string(field));
    return value;
}

}  // namespace

Position parse_fen(std::string_view text) {
    auto fields = split_fields(text);
    if (fields.size() != 6) throw FenError(FenErrorKind::FieldCount, std::to_string(fields.size()) + " fields");

    Board b;
    int rank = 7, file = 0;
    for (char c : fields[0]) {
        if (c == '/') {
            if (file != 8) throw FenError(FenErrorKind::RankCount, "short rank " + std::to_string(rank + 1));
            if (--rank < 0) throw FenError(FenErrorKind::RankCount, "more than 8 ranks");
            file = 0;
        } else if (c >= '1' && c <= '9') {
            file += c - '0';
            if (file > 8) throw FenError(FenErrorKind::RankOverflow, "rank " + std::to_string(rank + 1));
        } else {
            auto piece = piece_from_char(c);
            if (!piece) throw FenError(FenErrorKind::BadPieceChar, std::string(1, c));
            if (file >= 8) throw FenError(FenErrorKind::RankOverflow, "rank " + std::to_string(rank + 1));
            b.put(make_square(file, rank), *piece);
            ++file;
        }
    }
    if (rank != 0 || file != 8) throw FenError(FenErrorKind::RankCount, "expected 8 complete ranks");
    if (popcount(b.pieces(Color::White, PieceType::King)) != 1 || popcount(b.pieces(Color::Black, PieceType::King)) != 1)
        throw FenError(FenErrorKind::KingCount, "exactly one king per color required");
    if (b.pieces(PieceType::Pawn) & (kRank1 | kRank8)) throw FenError(FenErrorKind::BadPieceChar, "pawn on back rank");

    if (fields[1] == "w") b.side_to_move = Color::White;
    else if (fields[1] == "b") b.side_to_move = Color::Black;
    else throw FenError(FenErrorKind::BadSideToMove, std::string(fields[1]));

    if (fields[2] != "-") {
        for (char c : fields[2]) {
            std::uint8_t flag = 0;
            switch (c) {
                case 'K': flag = castling::WhiteKing; break;
                case 'Q': flag = castling::WhiteQueen; break;
                case 'k': flag = castling::BlackKing; break;
                case 'q': flag = castling::BlackQueen; break;
                default: throw FenError(FenErrorKind::BadCastling, std::string(fields[2]));
            }
            if (b.castling & flag) throw FenError(FenErrorKind::BadCastling, std::string(fields[2]));
            b.castling |= flag;
        }
        auto has = [&](int f, int r, Piece p) { return b.at(make_square(f, r)) == p; };
        const Piece wk{Color::White, PieceType::King}, wr{Color::White, PieceType::Rook};
        const Piece bk{Color::Black, PieceType::King}, br{Color::Black, PieceType::Rook};
        if (((b.castling & castling::WhiteKing) && !(has(4, 0, wk) && has(7, 0, wr))) ||
            ((b.castling & castling::WhiteQueen) && !(has(4, 0, wk) && has(0, 0, wr))) ||
            ((b.castling & castling::BlackKing) && !(has(4, 7, bk) && has(7, 7, br))) ||
            ((b.castling & castling::BlackQueen) && !(has(4, 7, bk) && has(0, 7, br))))
            throw FenError(FenErrorKind::BadCastling, "rights inconsistent with king/rook placement");
    }

    if (fields[3] != "-") {
        auto ep = parse_square(fields[3]);
        if (!ep) throw FenError(FenErrorKind::BadEnPassant, std::string(fields[3]));
        const bool white_to_move = b.side_to_move == Color::White;
        const int expected_rank = white_to_move ? 5 : 2;
        const int pawn_offset = white_to_move ? -8 : 8;
        if (rank_of(*ep) != expected_rank || !b.at(*ep).empty() ||
            b.at(static_cast<Square>(*ep + pawn_offset)) != Piece{white_to_move ? Color::Black : Color::White, PieceType::Pawn} ||
            !b.at(static_cast<Square>(*ep - pawn_offset)).empty())
            throw FenError(FenErrorKind::BadEnPassant, std::string(fields[3]));
        b.en_passant = ep;
    }

    b.halfmove_clock = parse_counter(fields[4], 0);
    b.fullmove_number = parse_counter(fields[5], 1);

    if (b.attacked(b.king_square(~b.side_to_move), b.side_to_move))
        throw FenError(FenErrorKind::KingCount, "side not to move is in check");

    b.hash = b.compute_hash();
    return Position::from_board(b);
}

std::string to_fen(const Board& b) {
    std::ostringstream out;
    for (int rank = 7; rank >= 0; --rank) {
        int empty = 0;
        for (int file = 0; file < 8; ++file) {
            Piece p = b.at(make_square(file, rank));
            if (p.empty()) {
                ++empty;
                continue;
            }
            if (empty) out << empty;
            empty = 0;
            out << piece_char(p);
        }
        if (empty) out << empty;
        if (rank) out << '/';
    }
    out << ' ' << (b.side_to_move == Color::White ? 'w' : 'b') << ' ';
    if (!b.castling) out << '-';
    if (b.castling & castling::WhiteKing) out << 'K';
    if (b.castling & castling::WhiteQueen) out << 'Q';
    if (b.castling & castling::BlackKing) out << 'k';
    if (b.castling & castling::BlackQueen) out << 'q';
    out << ' ' << (b.en_passant ? square_name(*b.en_passant) : "-");
    out << ' ' << b.halfmove_clock << ' ' << b.fullmove_number;
    return out.str();
}

std::string to_fen(const Position& p) { return to_fen(p.board()); }

// ---------------------------------------------------------------------------
// Move generation entry points

std::vector<Move> legal_moves(const Position& p) {
    MoveList list;
    p.board().generate_legal(list);
    std::vector<Move> out(list.begin(), list.end());
    std::sort(out.begin(), out.end());
    return out;
}

Position apply_move(const Position& p, const Move& m) {
    MoveList list;
    p.board().generate_legal(list);
    for (const Move& legal : list)
        if (legal == m) return p.play(legal);
    throw IllegalMoveError("illegal move " + m.uci() + " in " + to_fen(p));
}

Move resolve_uci(const Position& p, std::string_view text) {
    auto m = parse_uci_move(text);
    if (!m) throw IllegalMoveError("malformed move text '" + std::string(text) + "'");
    MoveList list;
    p.board().generate_legal(list);
    for (const Move& legal : list)
        if (legal == *m) return legal;
    throw IllegalMoveError("illegal move " + std::string(text) + " in " + to_fen(p));
}

namespace {

std::uint64_t perft_board(const Board& b, int depth) {
    MoveList list;
    b.generate_legal(list);
    if (depth == 1) return static_cast<std::uint64_t>(list.size);
    std::uint64_t nodes = 0;
    for (const Move& m : list) {
        Board next = b;
        next.make(m);
        nodes += perft_board(next, depth - 1);
    }
    return nodes;
}

}  // namespace

std::uint64_t perft(const Position& p, int depth) {
    if (depth <= 0) return 1;
    return perft_board(p.board(), depth);
}

Outcome outcome(const Position& p) {
    MoveList list;
    p.board().generate_legal(list);
    if (list.size == 0) {
        if (p.in_check()) return p.side_to_move() == Color::White ? Outcome::BlackWin : Outcome::WhiteWin;
        return Outcome::Draw;
    }
    if (p.halfmove_clock() >= 100 || p.repetition_count() >= 3 || insufficient_material(p.board())) return Outcome::Draw;
    return Outcome::Ongoing;
}

}  // namespace pmcts
