#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dshgt/minic/ast.hpp"
#include "dshgt/minic/lexer.hpp"

namespace dshgt::minic {

// Recursive-descent parser for the mini-C subset: int/float scalars and fixed
// arrays, assignments, arithmetic/relational/logical operators, if/else,
// while, for, calls, return, and line comments.
class Parser {
public:
    Parser(std::string file, const std::string& text) : file_(std::move(file)) {
        LexResult lr = lex(file_, text);
        tokens_ = std::move(lr.tokens);
        comments_ = std::move(lr.comments);
    }

    ProgramFile parse_file() {
        ProgramFile pf;
        pf.path = file_;
        while (!at_end()) {
            expect_type_keyword();
            std::string type = peek().text;
            if (type == "void" && peek(2).text != "(")
                err(peek().line, "void is only valid as a function return type");
            advance();
            Token name = expect(TokKind::Ident, "name");
            if (peek().text == "(") {
                pf.functions.push_back(parse_function(type, name));
            } else {
                pf.globals.push_back(parse_global(type, name));
            }
        }
        for (const CommentBlock& cb : comments_) {
            std::string joined;
            for (std::size_t i = 0; i < cb.lines.size(); ++i) {
                if (i) joined += "\n";
                joined += trim(cb.lines[i]);
            }
            pf.comment_blocks.emplace_back(cb.first_line, joined);
        }
        attach_annotations(pf);
        return pf;
    }

private:
    std::string file_;
    std::vector<Token> tokens_;
    std::vector<CommentBlock> comments_;
    std::size_t pos_ = 0;

    [[noreturn]] void err(int line, const std::string& msg) const {
        throw ParseError(file_ + ":" + std::to_string(line) + ": " + msg);
    }

    const Token& peek(std::size_t ahead = 0) const {
        std::size_t i = pos_ + ahead;
        return i < tokens_.size() ? tokens_[i] : tokens_.back();
    }
    const Token& cur() const { return peek(); }
    bool at_end() const { return cur().kind == TokKind::End; }
    void advance() { if (pos_ + 1 < tokens_.size()) ++pos_; }

    bool accept_punct(const std::string& p) {
        if (cur().kind == TokKind::Punct && cur().text == p) {
            advance();
            return true;
        }
        return false;
    }

    Token expect_punct(const std::string& p) {
        if (cur().kind != TokKind::Punct || cur().text != p)
            err(cur().line, "expected '" + p + "', got '" + cur().text + "'");
        Token t = cur();
        advance();
        return t;
    }

    Token expect(TokKind k, const std::string& what) {
        if (cur().kind != k) err(cur().line, "expected " + what + ", got '" + cur().text + "'");
        Token t = cur();
        advance();
        return t;
    }

    void expect_type_keyword() {
        if (cur().kind != TokKind::Keyword ||
            (cur().text != "int" && cur().text != "float" && cur().text != "void"))
            err(cur().line, "expected a declaration, got '" + cur().text + "'");
    }

    bool at_type_keyword() const {
        return cur().kind == TokKind::Keyword &&
               (cur().text == "int" || cur().text == "float");
    }

    static std::string trim(const std::string& s) {
        std::size_t b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        std::size_t e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    Stmt parse_global(const std::string& type, const Token& name) {
        Stmt g;
        g.kind = Stmt::Kind::Decl;
        g.line = name.line;
        g.type_name = type;
        g.name = name.text;
        if (accept_punct("[")) {
            Token size = expect(TokKind::IntLit, "array size");
            g.array_size = std::stoll(size.text);
            expect_punct("]");
        }
        if (accept_punct("=")) {
            if (cur().kind != TokKind::IntLit && cur().kind != TokKind::FloatLit)
                err(cur().line, "global initializer must be a literal");
            auto lit = std::make_unique<Expr>();
            lit->kind = cur().kind == TokKind::IntLit ? Expr::Kind::IntLit : Expr::Kind::FloatLit;
            lit->line = cur().line;
            lit->text = cur().text;
            advance();
            g.init = std::move(lit);
        }
        expect_punct(";");
        return g;
    }

    Function parse_function(const std::string& ret_type, const Token& name) {
        Function fn;
        fn.return_type = ret_type;
        fn.name = name.text;
        fn.line = name.line;
        expect_punct("(");
        if (!accept_punct(")")) {
            do {
                expect_type_keyword();
                if (cur().text == "void" && peek(1).text == ")") {
                    advance();
                    break;  // f(void)
                }
                if (cur().text == "void") err(cur().line, "void parameter");
                Param p;
                p.type_name = cur().text;
                advance();
                Token pn = expect(TokKind::Ident, "parameter name");
                p.name = pn.text;
                p.line = pn.line;
                fn.params.push_back(std::move(p));
            } while (accept_punct(","));
            expect_punct(")");
        }
        fn.body = parse_block();
        return fn;
    }

    StmtPtr parse_block() {
        Token open = expect_punct("{");
        auto blk = std::make_unique<Stmt>();
        blk->kind = Stmt::Kind::Block;
        blk->line = open.line;
        while (!accept_punct("}")) {
            if (at_end()) err(cur().line, "unterminated block");
            blk->body.push_back(parse_statement());
        }
        return blk;
    }

    StmtPtr parse_statement() {
        if (cur().kind == TokKind::Punct && cur().text == "{") return parse_block();
        if (at_type_keyword()) return parse_decl();
        if (cur().kind == TokKind::Keyword) {
            if (cur().text == "if") return parse_if();
            if (cur().text == "while") return parse_while();
            if (cur().text == "for") return parse_for();
            if (cur().text == "return") return parse_return();
            err(cur().line, "unexpected keyword '" + cur().text + "'");
        }
        return parse_simple_statement(true);
    }

    StmtPtr parse_decl() {
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::Decl;
        s->type_name = cur().text;
        s->line = cur().line;
        advance();
        Token name = expect(TokKind::Ident, "variable name");
        s->name = name.text;
        if (accept_punct("[")) {
            Token size = expect(TokKind::IntLit, "array size");
            s->array_size = std::stoll(size.text);
            expect_punct("]");
            if (cur().kind == TokKind::Punct && cur().text == "=")
                err(cur().line, "unsupported construct 'array initializer'");
        }
        if (accept_punct("=")) s->init = parse_expr();
        expect_punct(";");
        return s;
    }

    // Assignment or call; used for plain statements and for-loop clauses.
    StmtPtr parse_simple_statement(bool eat_semicolon) {
        int line = cur().line;
        ExprPtr e = parse_expr();
        StmtPtr s = std::make_unique<Stmt>();
        s->line = line;
        if (cur().kind == TokKind::Punct && cur().text == "=") {
            if (e->kind != Expr::Kind::Ident && e->kind != Expr::Kind::Index)
                err(cur().line, "assignment target must be a variable or array element");
            advance();
            s->kind = Stmt::Kind::Assign;
            s->lhs = std::move(e);
            s->expr = parse_expr();
        } else {
            if (e->kind != Expr::Kind::Call)
                err(line, "unsupported construct 'expression statement'");
            s->kind = Stmt::Kind::ExprStmt;
            s->expr = std::move(e);
        }
        if (eat_semicolon) expect_punct(";");
        return s;
    }

    StmtPtr parse_if() {
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::If;
        s->line = cur().line;
        advance();
        expect_punct("(");
        s->expr = parse_expr();
        expect_punct(")");
        s->then_branch = parse_statement();
        if (cur().kind == TokKind::Keyword && cur().text == "else") {
            advance();
            s->else_branch = parse_statement();
        }
        return s;
    }

    StmtPtr parse_while() {
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::While;
        s->line = cur().line;
        advance();
        expect_punct("(");
        s->expr = parse_expr();
        expect_punct(")");
        s->loop_body = parse_statement();
        return s;
    }

    StmtPtr parse_for() {
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::For;
        s->line = cur().line;
        advance();
        expect_punct("(");
        if (!accept_punct(";")) {
            s->init_stmt = parse_simple_statement(false);
            expect_punct(";");
        }
        if (cur().kind == TokKind::Punct && cur().text == ";")
            err(cur().line, "unsupported construct 'for without condition'");
        s->expr = parse_expr();
        expect_punct(";");
        if (!(cur().kind == TokKind::Punct && cur().text == ")"))
            s->update_stmt = parse_simple_statement(false);
        expect_punct(")");
        s->loop_body = parse_statement();
        return s;
    }

    StmtPtr parse_return() {
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::Return;
        s->line = cur().line;
        advance();
        if (!(cur().kind == TokKind::Punct && cur().text == ";")) s->expr = parse_expr();
        expect_punct(";");
        return s;
    }

    // Precedence climbing: || < && < == != < relational < additive < multiplicative.
    ExprPtr parse_expr() { return parse_binary(0); }

    static int precedence(const std::string& op) {
        if (op == "||") return 1;
        if (op == "&&") return 2;
        if (op == "==" || op == "!=") return 3;
        if (op == "<" || op == ">" || op == "<=" || op == ">=") return 4;
        if (op == "+" || op == "-") return 5;
        if (op == "*" || op == "/" || op == "%") return 6;
        return 0;
    }

    ExprPtr parse_binary(int min_prec) {
        ExprPtr lhs = parse_unary();
        while (cur().kind == TokKind::Punct) {
            int prec = precedence(cur().text);
            if (prec == 0 || prec < min_prec) break;
            std::string op = cur().text;
            int line = cur().line;
            advance();
            ExprPtr rhs = parse_binary(prec + 1);
            auto e = std::make_unique<Expr>();
            e->kind = Expr::Kind::Binary;
            e->line = line;
            e->text = op;
            e->args.push_back(std::move(lhs));
            e->args.push_back(std::move(rhs));
            lhs = std::move(e);
        }
        return lhs;
    }

    ExprPtr parse_unary() {
        if (cur().kind == TokKind::Punct && (cur().text == "-" || cur().text == "!")) {
            auto e = std::make_unique<Expr>();
            e->kind = Expr::Kind::Unary;
            e->line = cur().line;
            e->text = cur().text;
            advance();
            e->args.push_back(parse_unary());
            return e;
        }
        return parse_postfix();
    }

    ExprPtr parse_postfix() {
        ExprPtr base = parse_primary();
        for (;;) {
            if (cur().kind == TokKind::Punct && cur().text == "(") {
                if (base->kind != Expr::Kind::Ident)
                    err(cur().line, "only named functions can be called");
                advance();
                auto call = std::make_unique<Expr>();
                call->kind = Expr::Kind::Call;
                call->line = base->line;
                call->text = base->text;
                if (!accept_punct(")")) {
                    do {
                        call->args.push_back(parse_expr());
                    } while (accept_punct(","));
                    expect_punct(")");
                }
                base = std::move(call);
            } else if (cur().kind == TokKind::Punct && cur().text == "[") {
                if (base->kind != Expr::Kind::Ident)
                    err(cur().line, "only named arrays can be indexed");
                advance();
                auto idx = std::make_unique<Expr>();
                idx->kind = Expr::Kind::Index;
                idx->line = base->line;
                idx->text = base->text;
                idx->args.push_back(parse_expr());
                expect_punct("]");
                base = std::move(idx);
            } else {
                break;
            }
        }
        return base;
    }

    ExprPtr parse_primary() {
        if (accept_punct("(")) {
            ExprPtr e = parse_expr();
            expect_punct(")");
            return e;
        }
        auto e = std::make_unique<Expr>();
        e->line = cur().line;
        if (cur().kind == TokKind::IntLit) {
            e->kind = Expr::Kind::IntLit;
            e->text = cur().text;
            advance();
            return e;
        }
        if (cur().kind == TokKind::FloatLit) {
            e->kind = Expr::Kind::FloatLit;
            e->text = cur().text;
            advance();
            return e;
        }
        if (cur().kind == TokKind::Ident) {
            e->kind = Expr::Kind::Ident;
            e->text = cur().text;
            advance();
            return e;
        }
        err(cur().line, "expected an expression, got '" + cur().text + "'");
    }

    // The contiguous comment block ending on the line above a function
    // definition becomes its annotation: whitespace-tokenized, lowercased.
    void attach_annotations(ProgramFile& pf) {
        for (Function& fn : pf.functions) {
            for (const CommentBlock& cb : comments_) {
                if (cb.last_line != fn.line - 1) continue;
                for (const std::string& ln : cb.lines) {
                    std::string word;
                    for (char c : ln) {
                        if (c == ' ' || c == '\t' || c == '\r') {
                            if (!word.empty()) fn.annotation_tokens.push_back(word);
                            word.clear();
                        } else {
                            word += static_cast<char>(
                                c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
                        }
                    }
                    if (!word.empty()) fn.annotation_tokens.push_back(word);
                }
                break;
            }
        }
    }
};

}  // namespace dshgt::minic
