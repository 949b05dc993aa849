#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dshgt/hetgraph.hpp"

namespace dshgt::minic {

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
    enum class Kind { IntLit, FloatLit, Ident, Unary, Binary, Call, Index };
    Kind kind;
    int line = 0;
    std::string text;           // literal text, identifier or callee name, operator symbol
    std::vector<ExprPtr> args;  // operands, call arguments, or the index expression

    // filled by the CPG builder
    NodeId cpg_root = 0;
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct Stmt {
    enum class Kind { Decl, Assign, ExprStmt, If, While, For, Return, Block };
    Kind kind;
    int line = 0;

    // Decl
    std::string type_name;
    std::string name;
    long long array_size = -1;  // -1: scalar
    ExprPtr init;

    // Assign
    ExprPtr lhs;

    // Assign rhs, ExprStmt expression, Return value, If/While/For condition
    ExprPtr expr;

    // For clauses
    StmtPtr init_stmt;
    StmtPtr update_stmt;

    // If branches, loop body, Block statements
    StmtPtr then_branch;
    StmtPtr else_branch;
    StmtPtr loop_body;
    std::vector<StmtPtr> body;

    // filled by the CPG builder
    NodeId cpg_root = 0;  // statement root in the CFG (0: not an executable node)
    NodeId cs_node = 0;   // CONTROL_STRUCTURE node for If/While/For
};

struct Param {
    std::string type_name;
    std::string name;
    int line = 0;
};

struct Function {
    std::string return_type;
    std::string name;
    std::vector<Param> params;
    StmtPtr body;  // Block
    int line = 0;
    std::vector<std::string> annotation_tokens;
};

struct ProgramFile {
    std::string path;
    std::vector<Function> functions;
    std::vector<Stmt> globals;
    std::vector<std::pair<int, std::string>> comment_blocks;  // (first line, joined text)
};

// A whole parsed source tree; one entry per file, in sorted path order.
struct MiniCProgram {
    std::vector<ProgramFile> files;
};

}  // namespace dshgt::minic
