#include "blocktune/lexer.hpp"

#include <cctype>

namespace blocktune::lex {
namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }

class Scanner {
public:
    explicit Scanner(std::string_view src) : src_(src) {}

    LexResult run() {
        bool line_start = true;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\n') {
                ++line_;
                ++pos_;
                line_start = true;
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
                continue;
            }
            if (c == '\\' && peek(1) == '\n') {
                pos_ += 2;
                ++line_;
                continue;
            }
            if (c == '/' && peek(1) == '/') {
                skip_line_comment();
                continue;
            }
            if (c == '/' && peek(1) == '*') {
                skip_block_comment();
                continue;
            }
            if (c == '#' && line_start) {
                directive();
                line_start = true;
                continue;
            }
            line_start = false;
            if (ident_start(c)) {
                identifier();
            } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                       (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
                number();
            } else if (c == '"') {
                quoted(pos_, '"', TokenKind::string);
            } else if (c == '\'') {
                quoted(pos_, '\'', TokenKind::character);
            } else {
                push(TokenKind::punct, pos_, pos_ + 1, line_);
                ++pos_;
            }
        }
        return std::move(out_);
    }

private:
    char peek(std::size_t ahead) const {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
    }

    void push(TokenKind kind, std::size_t begin, std::size_t end, int line) {
        out_.tokens.push_back({kind, begin, end, line, src_.substr(begin, end - begin)});
    }

    void skip_line_comment() {
        while (pos_ < src_.size() && src_[pos_] != '\n') {
            if (src_[pos_] == '\\' && peek(1) == '\n') {
                ++line_;
                ++pos_;
            }
            ++pos_;
        }
    }

    void skip_block_comment() {
        int start_line = line_;
        pos_ += 2;
        while (pos_ < src_.size()) {
            if (src_[pos_] == '*' && peek(1) == '/') {
                pos_ += 2;
                return;
            }
            if (src_[pos_] == '\n') ++line_;
            ++pos_;
        }
        out_.diagnostics.push_back("unterminated block comment starting at line " +
                                   std::to_string(start_line));
    }

    void directive() {
        std::size_t begin = pos_;
        int start_line = line_;
        std::size_t end = pos_;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\\' && peek(1) == '\n') {
                pos_ += 2;
                ++line_;
                end = pos_;
                continue;
            }
            if (c == '\n') break;
            if (c == '/' && peek(1) == '/') {
                skip_line_comment();
                break;
            }
            if (c == '/' && peek(1) == '*') {
                skip_block_comment();
                continue;
            }
            if (c == '"' || c == '\'') {
                skip_literal(c);
                end = pos_;
                continue;
            }
            ++pos_;
            if (!std::isspace(static_cast<unsigned char>(c))) end = pos_;
        }
        push(TokenKind::directive, begin, end, start_line);
    }

    void skip_literal(char quote) {
        ++pos_;
        while (pos_ < src_.size() && src_[pos_] != quote && src_[pos_] != '\n') {
            if (src_[pos_] == '\\') ++pos_;
            ++pos_;
        }
        if (pos_ < src_.size() && src_[pos_] == quote) ++pos_;
    }

    void identifier() {
        std::size_t begin = pos_;
        while (pos_ < src_.size() && ident_char(src_[pos_])) ++pos_;
        auto word = src_.substr(begin, pos_ - begin);
        if (pos_ < src_.size() && src_[pos_] == '"' &&
            (word == "R" || word == "u8R" || word == "uR" || word == "UR" || word == "LR")) {
            raw_string(begin);
            return;
        }
        if (pos_ < src_.size() && (src_[pos_] == '"' || src_[pos_] == '\'') &&
            (word == "L" || word == "u" || word == "U" || word == "u8")) {
            char q = src_[pos_];
            quoted(begin, q, q == '"' ? TokenKind::string : TokenKind::character);
            return;
        }
        push(TokenKind::identifier, begin, pos_, line_);
    }

    void number() {
        std::size_t begin = pos_;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (ident_char(c) || c == '.' || (c == '\'' && ident_char(peek(1)))) {
                ++pos_;
            } else if ((c == '+' || c == '-') && pos_ > begin &&
                       (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E' || src_[pos_ - 1] == 'p' ||
                        src_[pos_ - 1] == 'P')) {
                ++pos_;
            } else {
                break;
            }
        }
        push(TokenKind::number, begin, pos_, line_);
    }

    void quoted(std::size_t begin, char quote, TokenKind kind) {
        int start_line = line_;
        ++pos_;  // opening quote
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\\') {
                if (peek(1) == '\n') ++line_;
                pos_ += 2;
                continue;
            }
            if (c == quote) {
                ++pos_;
                push(kind, begin, pos_, start_line);
                return;
            }
            if (c == '\n') break;
            ++pos_;
        }
        out_.diagnostics.push_back("unterminated literal at line " + std::to_string(start_line));
        push(kind, begin, pos_, start_line);
    }

    void raw_string(std::size_t begin) {
        int start_line = line_;
        ++pos_;  // '"'
        auto paren = src_.find('(', pos_);
        if (paren == std::string_view::npos) {
            out_.diagnostics.push_back("malformed raw string at line " + std::to_string(start_line));
            pos_ = src_.size();
            return;
        }
        std::string close = ")" + std::string(src_.substr(pos_, paren - pos_)) + "\"";
        auto end = src_.find(close, paren + 1);
        std::size_t stop = end == std::string_view::npos ? src_.size() : end + close.size();
        for (std::size_t i = pos_; i < stop; ++i) {
            if (src_[i] == '\n') ++line_;
        }
        pos_ = stop;
        if (end == std::string_view::npos) {
            out_.diagnostics.push_back("unterminated raw string at line " + std::to_string(start_line));
        }
        push(TokenKind::string, begin, pos_, start_line);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    LexResult out_;
};

}  // namespace

LexResult tokenize(std::string_view source) { return Scanner(source).run(); }

std::size_t match_bracket(const std::vector<Token>& tokens, std::size_t open) {
    if (open >= tokens.size()) return npos;
    char o = tokens[open].text.empty() ? '\0' : tokens[open].text[0];
    char c = o == '(' ? ')' : o == '[' ? ']' : o == '{' ? '}' : '\0';
    if (c == '\0' || tokens[open].kind != TokenKind::punct) return npos;
    int depth = 0;
    for (std::size_t i = open; i < tokens.size(); ++i) {
        if (tokens[i].is(o)) ++depth;
        else if (tokens[i].is(c) && --depth == 0) return i;
    }
    return npos;
}

}  // namespace blocktune::lex
