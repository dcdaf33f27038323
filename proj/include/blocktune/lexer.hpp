#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// Lexical scanner for C/C++/CUDA sources. Comments vanish, string and
// character literals become opaque tokens, and preprocessor lines are kept
// whole so include and define directives can be recovered verbatim.
namespace blocktune::lex {

enum class TokenKind { identifier, number, string, character, punct, directive };

struct Token {
    TokenKind kind;
    std::size_t begin;  // byte offsets into the source
    std::size_t end;
    int line;
    std::string_view text;

    bool is(char c) const { return kind == TokenKind::punct && text.size() == 1 && text[0] == c; }
    bool is_ident(std::string_view s) const { return kind == TokenKind::identifier && text == s; }
};

struct LexResult {
    std::vector<Token> tokens;
    std::vector<std::string> diagnostics;
};

// Tokens view into `source`, which must outlive the result.
LexResult tokenize(std::string_view source);

// Index of the token closing the bracket at `open` ('(' '[' '{'), or npos.
std::size_t match_bracket(const std::vector<Token>& tokens, std::size_t open);

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

}  // namespace blocktune::lex
