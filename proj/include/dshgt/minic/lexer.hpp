#pragma once

#include <string>
#include <vector>

#include "dshgt/common.hpp"

namespace dshgt::minic {

enum class TokKind { Ident, Keyword, IntLit, FloatLit, Punct, End };

struct Token {
    TokKind kind = TokKind::End;
    std::string text;
    int line = 1;
};

struct CommentBlock {
    int first_line = 0;
    int last_line = 0;
    std::vector<std::string> lines;  // text after "//", untrimmed
};

struct LexResult {
    std::vector<Token> tokens;  // terminated by an End token
    std::vector<CommentBlock> comments;
};

namespace detail {

inline bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline bool is_keyword(const std::string& s) {
    static const char* kw[] = {"int", "float", "void", "if", "else", "while", "for", "return"};
    for (const char* k : kw)
        if (s == k) return true;
    return false;
}

// Recognized so the error can name the construct instead of reporting a
// generic syntax failure.
inline bool is_unsupported_keyword(const std::string& s) {
    static const char* kw[] = {
        "struct", "union",  "enum",   "typedef", "char",   "double",   "long",
        "short",  "signed", "unsigned", "goto",  "switch", "case",     "default",
        "break",  "continue", "do",   "static",  "const",  "sizeof",   "extern",
        "auto",   "register", "volatile",
    };
    for (const char* k : kw)
        if (s == k) return true;
    return false;
}

}  // namespace detail

inline LexResult lex(const std::string& file, const std::string& text) {
    LexResult out;
    std::size_t i = 0;
    int line = 1;
    auto err = [&](const std::string& msg) {
        throw ParseError(file + ":" + std::to_string(line) + ": " + msg);
    };

    auto push_comment_line = [&](int at_line, std::string body) {
        if (!out.comments.empty() && out.comments.back().last_line == at_line - 1) {
            out.comments.back().last_line = at_line;
            out.comments.back().lines.push_back(std::move(body));
        } else {
            out.comments.push_back({at_line, at_line, {std::move(body)}});
        }
    };

    while (i < text.size()) {
        char c = text[i];
        if (c == '\n') {
            ++line;
            ++i;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            continue;
        }
        if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
            std::size_t start = i + 2;
            std::size_t end = text.find('\n', start);
            if (end == std::string::npos) end = text.size();
            push_comment_line(line, text.substr(start, end - start));
            i = end;
            continue;
        }
        if (c == '/' && i + 1 < text.size() && text[i + 1] == '*')
            err("unsupported construct 'block comment'");
        if (detail::is_ident_start(c)) {
            std::size_t start = i;
            while (i < text.size() && detail::is_ident_char(text[i])) ++i;
            std::string word = text.substr(start, i - start);
            if (detail::is_unsupported_keyword(word)) err("unsupported construct '" + word + "'");
            out.tokens.push_back({detail::is_keyword(word) ? TokKind::Keyword : TokKind::Ident,
                                  std::move(word), line});
            continue;
        }
        if (detail::is_digit(c)) {
            std::size_t start = i;
            bool is_float = false;
            while (i < text.size() && detail::is_digit(text[i])) ++i;
            if (i < text.size() && text[i] == '.') {
                is_float = true;
                ++i;
                while (i < text.size() && detail::is_digit(text[i])) ++i;
            }
            if (i < text.size() && detail::is_ident_char(text[i])) err("malformed number literal");
            out.tokens.push_back({is_float ? TokKind::FloatLit : TokKind::IntLit,
                                  text.substr(start, i - start), line});
            continue;
        }
        static const char* two_char[] = {"<=", ">=", "==", "!=", "&&", "||"};
        bool matched = false;
        for (const char* p : two_char) {
            if (text.compare(i, 2, p) == 0) {
                out.tokens.push_back({TokKind::Punct, p, line});
                i += 2;
                matched = true;
                break;
            }
        }
        if (matched) continue;
        if (std::string("(){}[];,=+-*/%<>!").find(c) != std::string::npos) {
            out.tokens.push_back({TokKind::Punct, std::string(1, c), line});
            ++i;
            continue;
        }
        if (c == '&' || c == '|') err("unsupported construct 'bitwise operator'");
        if (c == '"' || c == '\'') err("unsupported construct 'string or character literal'");
        err(std::string("unexpected character '") + c + "'");
    }
    out.tokens.push_back({TokKind::End, "", line});
    return out;
}

}  // namespace dshgt::minic
