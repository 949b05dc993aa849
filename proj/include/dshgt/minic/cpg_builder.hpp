#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "dshgt/cpg_json.hpp"
#include "dshgt/hetgraph.hpp"
#include "dshgt/minic/parser.hpp"

namespace dshgt::minic {

// Lowers a parsed mini-C program to a code property graph. Node ids are
// assigned by sorted file path, then preorder position, so identical input
// trees always produce identical graphs.
class CpgBuilder {
public:
    CpgBuilder() : bundle_{Cpg(TypeRegistry{}), {}, {}} {
        const TypeRegistry& r = bundle_.graph.registry();
        t_file_ = r.node_type_checked("FILE");
        t_method_ = r.node_type_checked("METHOD");
        t_param_ = r.node_type_checked("METHOD_PARAMETER_IN");
        t_method_return_ = r.node_type_checked("METHOD_RETURN");
        t_block_ = r.node_type_checked("BLOCK");
        t_call_ = r.node_type_checked("CALL");
        t_cs_ = r.node_type_checked("CONTROL_STRUCTURE");
        t_ident_ = r.node_type_checked("IDENTIFIER");
        t_literal_ = r.node_type_checked("LITERAL");
        t_local_ = r.node_type_checked("LOCAL");
        t_return_ = r.node_type_checked("RETURN");
        t_comment_ = r.node_type_checked("COMMENT");
        e_ast_ = r.edge_type_checked("AST");
        e_cfg_ = r.edge_type_checked("CFG");
        e_cdg_ = r.edge_type_checked("CDG");
        e_rd_ = r.edge_type_checked("REACHING_DEF");
        e_call_ = r.edge_type_checked("CALL");
        e_arg_ = r.edge_type_checked("ARGUMENT");
        e_cond_ = r.edge_type_checked("CONDITION");
        e_contains_ = r.edge_type_checked("CONTAINS");
        e_srcfile_ = r.edge_type_checked("SOURCE_FILE");
        e_ref_ = r.edge_type_checked("REF");
    }

    CpgBundle build(MiniCProgram& prog) {
        for (ProgramFile& pf : prog.files) build_file(pf);
        resolve_pending_refs();
        resolve_pending_calls();
        for (FuncCtx& fc : funcs_) emit_reaching_defs(fc);
        bundle_.graph.validate();
        return std::move(bundle_);
    }

private:
    struct PendingExit {
        NodeId node;
        std::string label;
    };
    using Exits = std::vector<PendingExit>;

    struct DefUse {
        std::vector<std::pair<std::string, NodeId>> defs;  // (var, def site node)
        std::vector<std::string> uses;
    };

    struct FuncCtx {
        std::string file;
        NodeId method = 0;
        NodeId method_return = 0;
        std::vector<std::pair<std::string, NodeId>> entry_defs;  // params + globals
        std::vector<NodeId> cfg_nodes;                           // statement roots, walk order
        std::vector<std::pair<NodeId, NodeId>> cfg_edges;
        std::map<NodeId, DefUse> def_use;
    };

    CpgBundle bundle_;
    NodeId next_id_ = 1;
    std::vector<FuncCtx> funcs_;
    std::map<std::string, NodeId> global_vars_;                 // name -> LOCAL node
    std::map<std::string, NodeId> methods_;                     // name -> METHOD node
    std::vector<std::tuple<NodeId, std::string, std::string, int>> pending_refs_;
    std::vector<std::tuple<NodeId, std::string>> pending_calls_;
    std::vector<std::vector<std::pair<std::string, NodeId>>> scopes_;
    FuncCtx* cur_func_ = nullptr;

    TypeId t_file_, t_method_, t_param_, t_method_return_, t_block_, t_call_, t_cs_,
        t_ident_, t_literal_, t_local_, t_return_, t_comment_;
    TypeId e_ast_, e_cfg_, e_cdg_, e_rd_, e_call_, e_arg_, e_cond_, e_contains_,
        e_srcfile_, e_ref_;

    NodeId new_node(TypeId type, std::string code, std::string name, int line,
                    const std::string& file) {
        CpgNode n;
        n.id = next_id_++;
        n.node_type = type;
        n.code = std::move(code);
        n.name = std::move(name);
        n.line = line;
        n.file = file;
        bundle_.graph.add_node(std::move(n));
        NodeId id = next_id_ - 1;
        if (cur_func_) bundle_.graph.add_edge({cur_func_->method, id, e_contains_, ""});
        return id;
    }

    void edge(NodeId src, NodeId dst, TypeId type, std::string label = "") {
        bundle_.graph.add_edge({src, dst, type, std::move(label)});
    }

    // ---- expression text reconstruction -------------------------------

    static std::string expr_text(const Expr& e) {
        switch (e.kind) {
            case Expr::Kind::IntLit:
            case Expr::Kind::FloatLit:
            case Expr::Kind::Ident:
                return e.text;
            case Expr::Kind::Unary:
                return e.text + wrap(*e.args[0]);
            case Expr::Kind::Binary:
                return wrap(*e.args[0]) + " " + e.text + " " + wrap(*e.args[1]);
            case Expr::Kind::Call: {
                std::string s = e.text + "(";
                for (std::size_t i = 0; i < e.args.size(); ++i) {
                    if (i) s += ", ";
                    s += expr_text(*e.args[i]);
                }
                return s + ")";
            }
            case Expr::Kind::Index:
                return e.text + "[" + expr_text(*e.args[0]) + "]";
        }
        return "";
    }

    static std::string wrap(const Expr& e) {
        if (e.kind == Expr::Kind::Binary) return "(" + expr_text(e) + ")";
        return expr_text(e);
    }

    static const char* operator_call_name(const std::string& op, bool unary) {
        if (unary) {
            if (op == "-") return "<operator>.neg";
            if (op == "!") return "<operator>.not";
        }
        if (op == "=") return "<operator>.assign";
        if (op == "+") return "<operator>.add";
        if (op == "-") return "<operator>.sub";
        if (op == "*") return "<operator>.mul";
        if (op == "/") return "<operator>.div";
        if (op == "%") return "<operator>.mod";
        if (op == "<") return "<operator>.lt";
        if (op == ">") return "<operator>.gt";
        if (op == "<=") return "<operator>.le";
        if (op == ">=") return "<operator>.ge";
        if (op == "==") return "<operator>.eq";
        if (op == "!=") return "<operator>.ne";
        if (op == "&&") return "<operator>.and";
        if (op == "||") return "<operator>.or";
        return "<operator>.unknown";
    }

    // ---- scope handling ------------------------------------------------

    void declare(const std::string& name, NodeId node, const std::string& file, int line) {
        for (const auto& [n, _] : scopes_.back())
            if (n == name)
                throw ParseError(file + ":" + std::to_string(line) + ": redeclaration of '" +
                                 name + "'");
        scopes_.back().emplace_back(name, node);
    }

    NodeId lookup_local(const std::string& name) const {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it)
            for (auto jt = it->rbegin(); jt != it->rend(); ++jt)
                if (jt->first == name) return jt->second;
        return 0;
    }

    // ---- file / function walk ------------------------------------------

    void build_file(ProgramFile& pf) {
        NodeId file_node = new_node(t_file_, pf.path, pf.path, 0, pf.path);
        for (const auto& [first_line, text] : pf.comment_blocks) {
            NodeId c = new_node(t_comment_, text, "", first_line, pf.path);
            edge(file_node, c, e_ast_);
        }
        for (Stmt& g : pf.globals) {
            std::string code = g.type_name + " " + g.name;
            if (g.array_size >= 0) code += "[" + std::to_string(g.array_size) + "]";
            if (g.init) code += " = " + expr_text(*g.init);
            NodeId local = new_node(t_local_, code, g.name, g.line, pf.path);
            edge(file_node, local, e_ast_);
            if (global_vars_.count(g.name))
                throw ParseError(pf.path + ":" + std::to_string(g.line) +
                                 ": redeclaration of global '" + g.name + "'");
            global_vars_[g.name] = local;
        }
        for (Function& fn : pf.functions) build_function(pf, fn, file_node);
    }

    void build_function(ProgramFile& pf, Function& fn, NodeId file_node) {
        if (methods_.count(fn.name))
            throw ParseError(pf.path + ":" + std::to_string(fn.line) +
                             ": duplicate definition of function '" + fn.name + "'");

        std::string sig = fn.return_type + " " + fn.name + "(";
        for (std::size_t i = 0; i < fn.params.size(); ++i) {
            if (i) sig += ", ";
            sig += fn.params[i].type_name + " " + fn.params[i].name;
        }
        sig += ")";

        funcs_.emplace_back();
        FuncCtx& fc = funcs_.back();
        fc.file = pf.path;

        NodeId method = new_node(t_method_, sig, fn.name, fn.line, pf.path);
        fc.method = method;
        methods_[fn.name] = method;
        edge(file_node, method, e_ast_);
        edge(file_node, method, e_srcfile_);
        if (!fn.annotation_tokens.empty()) bundle_.annotations[method] = fn.annotation_tokens;

        cur_func_ = &fc;
        scopes_.clear();
        scopes_.emplace_back();  // parameter scope

        for (const Param& p : fn.params) {
            NodeId pn = new_node(t_param_, p.type_name + " " + p.name, p.name, p.line, pf.path);
            edge(method, pn, e_ast_);
            declare(p.name, pn, pf.path, p.line);
            fc.entry_defs.emplace_back(p.name, pn);
        }
        NodeId ret = new_node(t_method_return_, fn.return_type, "", fn.line, pf.path);
        fc.method_return = ret;
        edge(method, ret, e_ast_);
        for (const auto& [name, node] : global_vars_) fc.entry_defs.emplace_back(name, node);

        NodeId body = emit_block(*fn.body, fc);
        edge(method, body, e_ast_);

        // CFG: unique entry (the METHOD node) and exit (METHOD_RETURN).
        Exits tail = wire_stmt(*fn.body, {{method, ""}}, fc);
        connect(tail, ret, fc);
        emit_cdg(*fn.body);

        cur_func_ = nullptr;
        scopes_.clear();
    }

    NodeId emit_block(Stmt& blk, FuncCtx& fc) {
        NodeId node = new_node(t_block_, "", "", blk.line, fc.file);
        blk.cpg_root = 0;
        scopes_.emplace_back();
        for (StmtPtr& s : blk.body) {
            NodeId top = emit_stmt(*s, fc);
            if (top) edge(node, top, e_ast_);
            if (s->kind == Stmt::Kind::Decl && s->init) {
                // the initializing assignment sits next to the LOCAL
                edge(node, s->cpg_root, e_ast_);
            }
        }
        scopes_.pop_back();
        return node;
    }

    // Returns the node to hang below the enclosing AST parent. Statement CFG
    // roots land in stmt.cpg_root.
    NodeId emit_stmt(Stmt& s, FuncCtx& fc) {
        switch (s.kind) {
            case Stmt::Kind::Decl: {
                std::string code = s.type_name + " " + s.name;
                if (s.array_size >= 0) code += "[" + std::to_string(s.array_size) + "]";
                NodeId local = new_node(t_local_, code, s.name, s.line, fc.file);
                declare(s.name, local, fc.file, s.line);
                if (s.init) {
                    std::string acode = code + " = " + expr_text(*s.init);
                    NodeId assign = new_node(t_call_, acode, "<operator>.assign", s.line, fc.file);
                    NodeId lhs = new_node(t_ident_, s.name, s.name, s.line, fc.file);
                    edge(lhs, local, e_ref_);
                    NodeId rhs = emit_expr(*s.init, fc);
                    edge(assign, lhs, e_ast_);
                    edge(assign, rhs, e_ast_);
                    edge(assign, lhs, e_arg_);
                    edge(assign, rhs, e_arg_);
                    s.cpg_root = assign;
                    fc.cfg_nodes.push_back(assign);
                    DefUse& du = fc.def_use[assign];
                    du.defs.emplace_back(s.name, assign);
                    collect_uses(*s.init, du.uses);
                } else {
                    s.cpg_root = 0;
                }
                return local;
            }
            case Stmt::Kind::Assign: {
                std::string code = expr_text(*s.lhs) + " = " + expr_text(*s.expr);
                NodeId assign = new_node(t_call_, code, "<operator>.assign", s.line, fc.file);
                NodeId lhs = emit_expr(*s.lhs, fc);
                NodeId rhs = emit_expr(*s.expr, fc);
                edge(assign, lhs, e_ast_);
                edge(assign, rhs, e_ast_);
                edge(assign, lhs, e_arg_);
                edge(assign, rhs, e_arg_);
                s.cpg_root = assign;
                fc.cfg_nodes.push_back(assign);
                DefUse& du = fc.def_use[assign];
                du.defs.emplace_back(s.lhs->text, assign);
                if (s.lhs->kind == Expr::Kind::Index) collect_uses(*s.lhs->args[0], du.uses);
                collect_uses(*s.expr, du.uses);
                return assign;
            }
            case Stmt::Kind::ExprStmt: {
                NodeId root = emit_expr(*s.expr, fc);
                s.cpg_root = root;
                fc.cfg_nodes.push_back(root);
                collect_uses(*s.expr, fc.def_use[root].uses);
                return root;
            }
            case Stmt::Kind::Return: {
                std::string code = s.expr ? "return " + expr_text(*s.expr) + ";" : "return;";
                NodeId ret = new_node(t_return_, code, "", s.line, fc.file);
                if (s.expr) {
                    NodeId v = emit_expr(*s.expr, fc);
                    edge(ret, v, e_ast_);
                    collect_uses(*s.expr, fc.def_use[ret].uses);
                }
                s.cpg_root = ret;
                fc.cfg_nodes.push_back(ret);
                return ret;
            }
            case Stmt::Kind::If: {
                NodeId cs = new_node(t_cs_, "if (" + expr_text(*s.expr) + ")", "if", s.line,
                                     fc.file);
                s.cs_node = cs;
                NodeId cond = emit_expr(*s.expr, fc);
                edge(cs, cond, e_ast_);
                edge(cs, cond, e_cond_);
                s.cpg_root = cond;
                fc.cfg_nodes.push_back(cond);
                collect_uses(*s.expr, fc.def_use[cond].uses);
                NodeId then_node = emit_branch(*s.then_branch, fc);
                edge(cs, then_node, e_ast_);
                if (s.else_branch) {
                    NodeId else_node = emit_branch(*s.else_branch, fc);
                    edge(cs, else_node, e_ast_);
                }
                return cs;
            }
            case Stmt::Kind::While: {
                NodeId cs = new_node(t_cs_, "while (" + expr_text(*s.expr) + ")", "while",
                                     s.line, fc.file);
                s.cs_node = cs;
                NodeId cond = emit_expr(*s.expr, fc);
                edge(cs, cond, e_ast_);
                edge(cs, cond, e_cond_);
                s.cpg_root = cond;
                fc.cfg_nodes.push_back(cond);
                collect_uses(*s.expr, fc.def_use[cond].uses);
                NodeId body = emit_branch(*s.loop_body, fc);
                edge(cs, body, e_ast_);
                return cs;
            }
            case Stmt::Kind::For: {
                std::string code = "for (";
                if (s.init_stmt) code += simple_stmt_text(*s.init_stmt);
                code += "; " + expr_text(*s.expr) + "; ";
                if (s.update_stmt) code += simple_stmt_text(*s.update_stmt);
                code += ")";
                NodeId cs = new_node(t_cs_, code, "for", s.line, fc.file);
                s.cs_node = cs;
                if (s.init_stmt) {
                    NodeId init_top = emit_stmt(*s.init_stmt, fc);
                    edge(cs, init_top, e_ast_);
                }
                NodeId cond = emit_expr(*s.expr, fc);
                edge(cs, cond, e_ast_);
                edge(cs, cond, e_cond_);
                s.cpg_root = cond;
                fc.cfg_nodes.push_back(cond);
                collect_uses(*s.expr, fc.def_use[cond].uses);
                if (s.update_stmt) {
                    NodeId up_top = emit_stmt(*s.update_stmt, fc);
                    edge(cs, up_top, e_ast_);
                }
                NodeId body = emit_branch(*s.loop_body, fc);
                edge(cs, body, e_ast_);
                return cs;
            }
            case Stmt::Kind::Block:
                return emit_block(s, fc);
        }
        return 0;
    }

    // Branches are normalized to BLOCK nodes so then/else/body subtrees have a
    // uniform shape whether or not the source used braces.
    NodeId emit_branch(Stmt& s, FuncCtx& fc) {
        if (s.kind == Stmt::Kind::Block) return emit_block(s, fc);
        NodeId block = new_node(t_block_, "", "", s.line, fc.file);
        NodeId top = emit_stmt(s, fc);
        if (top) edge(block, top, e_ast_);
        if (s.kind == Stmt::Kind::Decl && s.init) edge(block, s.cpg_root, e_ast_);
        return block;
    }

    static std::string simple_stmt_text(const Stmt& s) {
        if (s.kind == Stmt::Kind::Assign)
            return expr_text(*s.lhs) + " = " + expr_text(*s.expr);
        if (s.kind == Stmt::Kind::ExprStmt) return expr_text(*s.expr);
        return "";
    }

    NodeId emit_expr(Expr& e, FuncCtx& fc) {
        switch (e.kind) {
            case Expr::Kind::IntLit:
            case Expr::Kind::FloatLit: {
                e.cpg_root = new_node(t_literal_, e.text, "", e.line, fc.file);
                return e.cpg_root;
            }
            case Expr::Kind::Ident: {
                NodeId id = new_node(t_ident_, e.text, e.text, e.line, fc.file);
                e.cpg_root = id;
                NodeId decl = lookup_local(e.text);
                if (decl)
                    edge(id, decl, e_ref_);
                else
                    pending_refs_.emplace_back(id, e.text, fc.file, e.line);
                return id;
            }
            case Expr::Kind::Unary: {
                NodeId call = new_node(t_call_, expr_text(e), operator_call_name(e.text, true),
                                       e.line, fc.file);
                NodeId a = emit_expr(*e.args[0], fc);
                edge(call, a, e_ast_);
                edge(call, a, e_arg_);
                e.cpg_root = call;
                return call;
            }
            case Expr::Kind::Binary: {
                NodeId call = new_node(t_call_, expr_text(e), operator_call_name(e.text, false),
                                       e.line, fc.file);
                NodeId l = emit_expr(*e.args[0], fc);
                NodeId r = emit_expr(*e.args[1], fc);
                edge(call, l, e_ast_);
                edge(call, r, e_ast_);
                edge(call, l, e_arg_);
                edge(call, r, e_arg_);
                e.cpg_root = call;
                return call;
            }
            case Expr::Kind::Call: {
                NodeId call = new_node(t_call_, expr_text(e), e.text, e.line, fc.file);
                for (ExprPtr& a : e.args) {
                    NodeId an = emit_expr(*a, fc);
                    edge(call, an, e_ast_);
                    edge(call, an, e_arg_);
                }
                pending_calls_.emplace_back(call, e.text);
                e.cpg_root = call;
                return call;
            }
            case Expr::Kind::Index: {
                NodeId call = new_node(t_call_, expr_text(e), "<operator>.index", e.line,
                                       fc.file);
                NodeId base = new_node(t_ident_, e.text, e.text, e.line, fc.file);
                NodeId decl = lookup_local(e.text);
                if (decl)
                    edge(base, decl, e_ref_);
                else
                    pending_refs_.emplace_back(base, e.text, fc.file, e.line);
                NodeId idx = emit_expr(*e.args[0], fc);
                edge(call, base, e_ast_);
                edge(call, idx, e_ast_);
                edge(call, base, e_arg_);
                edge(call, idx, e_arg_);
                e.cpg_root = call;
                return call;
            }
        }
        return 0;
    }

    static void collect_uses(const Expr& e, std::vector<std::string>& out) {
        if (e.kind == Expr::Kind::Ident || e.kind == Expr::Kind::Index) {
            if (std::find(out.begin(), out.end(), e.text) == out.end()) out.push_back(e.text);
        }
        for (const ExprPtr& a : e.args) collect_uses(*a, out);
    }

    // ---- CFG wiring ------------------------------------------------------

    void connect(const Exits& exits, NodeId target, FuncCtx& fc) {
        for (const PendingExit& x : exits) {
            edge(x.node, target, e_cfg_, x.label);
            fc.cfg_edges.emplace_back(x.node, target);
        }
    }

    Exits wire_stmt(Stmt& s, Exits incoming, FuncCtx& fc) {
        switch (s.kind) {
            case Stmt::Kind::Decl:
                if (!s.cpg_root) return incoming;  // declaration without initializer
                connect(incoming, s.cpg_root, fc);
                return {{s.cpg_root, ""}};
            case Stmt::Kind::Assign:
            case Stmt::Kind::ExprStmt:
                connect(incoming, s.cpg_root, fc);
                return {{s.cpg_root, ""}};
            case Stmt::Kind::Return:
                connect(incoming, s.cpg_root, fc);
                connect({{s.cpg_root, ""}}, fc.method_return, fc);
                return {};
            case Stmt::Kind::Block: {
                Exits cur = std::move(incoming);
                for (StmtPtr& child : s.body) cur = wire_stmt(*child, std::move(cur), fc);
                return cur;
            }
            case Stmt::Kind::If: {
                connect(incoming, s.cpg_root, fc);
                Exits out = wire_stmt(*s.then_branch, {{s.cpg_root, "true"}}, fc);
                if (s.else_branch) {
                    Exits e2 = wire_stmt(*s.else_branch, {{s.cpg_root, "false"}}, fc);
                    out.insert(out.end(), e2.begin(), e2.end());
                } else {
                    out.push_back({s.cpg_root, "false"});
                }
                return out;
            }
            case Stmt::Kind::While: {
                connect(incoming, s.cpg_root, fc);
                Exits body = wire_stmt(*s.loop_body, {{s.cpg_root, "true"}}, fc);
                connect(body, s.cpg_root, fc);
                return {{s.cpg_root, "false"}};
            }
            case Stmt::Kind::For: {
                Exits cur = std::move(incoming);
                if (s.init_stmt) cur = wire_stmt(*s.init_stmt, std::move(cur), fc);
                connect(cur, s.cpg_root, fc);
                Exits body = wire_stmt(*s.loop_body, {{s.cpg_root, "true"}}, fc);
                if (s.update_stmt) body = wire_stmt(*s.update_stmt, std::move(body), fc);
                connect(body, s.cpg_root, fc);
                return {{s.cpg_root, "false"}};
            }
        }
        return {};
    }

    // ---- control dependence ----------------------------------------------

    void emit_cdg(Stmt& s) {
        if (s.kind == Stmt::Kind::Block) {
            for (StmtPtr& child : s.body) emit_cdg(*child);
            return;
        }
        if (s.kind == Stmt::Kind::If) {
            cdg_branch(s.cs_node, "true", *s.then_branch);
            if (s.else_branch) cdg_branch(s.cs_node, "false", *s.else_branch);
            emit_cdg_nested(*s.then_branch);
            if (s.else_branch) emit_cdg_nested(*s.else_branch);
        } else if (s.kind == Stmt::Kind::While || s.kind == Stmt::Kind::For) {
            if (s.kind == Stmt::Kind::For && s.update_stmt && s.update_stmt->cpg_root)
                edge(s.cs_node, s.update_stmt->cpg_root, e_cdg_, "true");
            cdg_branch(s.cs_node, "true", *s.loop_body);
            emit_cdg_nested(*s.loop_body);
        }
    }

    void emit_cdg_nested(Stmt& s) {
        if (s.kind == Stmt::Kind::Block) {
            for (StmtPtr& child : s.body) emit_cdg(*child);
        } else {
            emit_cdg(s);
        }
    }

    // Statements directly inside a branch depend on the control structure.
    // Plain nested blocks are transparent; nested control structures are
    // represented by their own CONTROL_STRUCTURE node.
    void cdg_branch(NodeId cs, const std::string& label, Stmt& branch) {
        if (branch.kind == Stmt::Kind::Block) {
            for (StmtPtr& child : branch.body) cdg_target(cs, label, *child);
        } else {
            cdg_target(cs, label, branch);
        }
    }

    void cdg_target(NodeId cs, const std::string& label, Stmt& s) {
        if (s.kind == Stmt::Kind::Block) {
            for (StmtPtr& child : s.body) cdg_target(cs, label, *child);
            return;
        }
        NodeId target = s.cs_node ? s.cs_node : s.cpg_root;
        if (target) edge(cs, target, e_cdg_, label);
    }

    // ---- deferred resolution ----------------------------------------------

    void resolve_pending_refs() {
        for (const auto& [node, name, file, line] : pending_refs_) {
            auto it = global_vars_.find(name);
            if (it == global_vars_.end())
                throw ParseError(file + ":" + std::to_string(line) +
                                 ": undeclared identifier '" + name + "'");
            edge(node, it->second, e_ref_);
        }
    }

    void resolve_pending_calls() {
        for (const auto& [node, name] : pending_calls_) {
            auto it = methods_.find(name);
            if (it != methods_.end()) edge(node, it->second, e_call_);
            // calls to undefined names are treated as external library calls
        }
    }

    // ---- reaching definitions ---------------------------------------------

    void emit_reaching_defs(FuncCtx& fc) {
        // def facts: entry defs (params, globals) first, then statement defs
        std::vector<std::pair<std::string, NodeId>> facts = fc.entry_defs;
        std::vector<NodeId> nodes;
        nodes.push_back(fc.method);
        for (NodeId n : fc.cfg_nodes) nodes.push_back(n);
        nodes.push_back(fc.method_return);
        std::map<NodeId, std::size_t> node_pos;
        for (std::size_t i = 0; i < nodes.size(); ++i) node_pos[nodes[i]] = i;

        for (NodeId n : fc.cfg_nodes) {
            auto it = fc.def_use.find(n);
            if (it == fc.def_use.end()) continue;
            for (const auto& d : it->second.defs) facts.push_back(d);
        }
        const std::size_t nf = facts.size();
        if (nf == 0) return;

        std::vector<std::vector<std::size_t>> succ(nodes.size());
        for (const auto& [a, b] : fc.cfg_edges) succ[node_pos.at(a)].push_back(node_pos.at(b));

        // gen/kill per position
        std::vector<std::vector<bool>> gen(nodes.size(), std::vector<bool>(nf, false));
        std::vector<std::vector<bool>> kill(nodes.size(), std::vector<bool>(nf, false));
        auto kill_var = [&](std::size_t pos, const std::string& var, std::size_t keep) {
            for (std::size_t f = 0; f < nf; ++f)
                if (f != keep && facts[f].first == var) kill[pos][f] = true;
        };
        for (std::size_t f = 0; f < fc.entry_defs.size(); ++f) {
            gen[0][f] = true;  // live at method entry
        }
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            auto it = fc.def_use.find(nodes[i]);
            if (it == fc.def_use.end()) continue;
            for (const auto& d : it->second.defs) {
                for (std::size_t f = 0; f < nf; ++f) {
                    if (facts[f].second == d.second && facts[f].first == d.first) {
                        gen[i][f] = true;
                        kill_var(i, d.first, f);
                    }
                }
            }
        }

        std::vector<std::vector<bool>> in(nodes.size(), std::vector<bool>(nf, false));
        std::vector<std::vector<bool>> out(nodes.size(), std::vector<bool>(nf, false));
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                std::vector<bool> new_out(nf, false);
                for (std::size_t f = 0; f < nf; ++f)
                    new_out[f] = gen[i][f] || (in[i][f] && !kill[i][f]);
                if (new_out != out[i]) {
                    out[i] = new_out;
                    changed = true;
                }
                for (std::size_t sidx : succ[i]) {
                    for (std::size_t f = 0; f < nf; ++f) {
                        if (out[i][f] && !in[sidx][f]) {
                            in[sidx][f] = true;
                            changed = true;
                        }
                    }
                }
            }
        }

        // sort use sites by node id for stable edge order
        std::vector<NodeId> use_sites = fc.cfg_nodes;
        std::sort(use_sites.begin(), use_sites.end());
        std::set<std::tuple<NodeId, NodeId, std::string>> emitted;
        for (NodeId n : use_sites) {
            auto it = fc.def_use.find(n);
            if (it == fc.def_use.end()) continue;
            std::size_t pos = node_pos.at(n);
            for (const std::string& var : it->second.uses) {
                for (std::size_t f = 0; f < nf; ++f) {
                    if (!in[pos][f] || facts[f].first != var) continue;
                    NodeId def_site = facts[f].second;
                    if (def_site == n) continue;
                    auto key = std::make_tuple(def_site, n, var);
                    if (emitted.insert(key).second) edge(def_site, n, e_rd_, var);
                }
            }
        }
    }
};

// Parses one in-memory source file and builds its CPG.
inline CpgBundle parse_source(const std::string& path, const std::string& text) {
    MiniCProgram prog;
    Parser p(path, text);
    prog.files.push_back(p.parse_file());
    CpgBuilder builder;
    return builder.build(prog);
}

// Builds one CPG covering every mini-C file (*.c, *.mc) under `dir`,
// recursively, in sorted path order.
inline CpgBundle parse_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ParseError(dir + ": not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        if (ext == ".c" || ext == ".mc") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) {
                  return a.generic_string() < b.generic_string();
              });
    if (files.empty()) throw ParseError(dir + ": no source files");

    MiniCProgram prog;
    for (const fs::path& f : files) {
        std::ifstream is(f);
        if (!is) throw ParseError(f.string() + ": cannot read file");
        std::stringstream ss;
        ss << is.rdbuf();
        Parser p(fs::relative(f, dir).generic_string(), ss.str());
        prog.files.push_back(p.parse_file());
    }
    CpgBuilder builder;
    return builder.build(prog);
}

}  // namespace dshgt::minic
