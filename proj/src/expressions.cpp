#include "mfdelay/expressions.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace mfdelay {

struct Expression::Node {
    enum class Kind {
        Constant,
        Variable,
        Add,
        Sub,
        Mul,
        Div,
        Pow,
        Neg,
        Exp,
        Log,
        Min,
        Max,
        SelectLE, // a <= b ? c : d; produced by differentiating min/max
    };

    Kind kind;
    double value = 0.0;
    std::string var;
    std::shared_ptr<const Node> a, b, c, d;

    static std::shared_ptr<const Node> constant(double v) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Constant;
        n->value = v;
        return n;
    }
    static std::shared_ptr<const Node> variable(std::string name) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Variable;
        n->var = std::move(name);
        return n;
    }
    static std::shared_ptr<const Node> make(Kind kind, std::shared_ptr<const Node> a,
                                            std::shared_ptr<const Node> b = nullptr,
                                            std::shared_ptr<const Node> c = nullptr,
                                            std::shared_ptr<const Node> d = nullptr) {
        auto n = std::make_shared<Node>();
        n->kind = kind;
        n->a = std::move(a);
        n->b = std::move(b);
        n->c = std::move(c);
        n->d = std::move(d);
        return n;
    }
};

namespace {

using Node = Expression::Node;
using Kind = Node::Kind;
using NodePtr = std::shared_ptr<const Node>;

bool is_const(const NodePtr& n, double v) {
    return n->kind == Kind::Constant && n->value == v;
}

// Light algebraic simplification keeps derivative trees small and makes
// "does not depend on v" an exact zero.
NodePtr simplify(Kind kind, NodePtr a, NodePtr b = nullptr, NodePtr c = nullptr,
                 NodePtr d = nullptr) {
    const bool const_a = a && a->kind == Kind::Constant;
    const bool const_b = b && b->kind == Kind::Constant;
    switch (kind) {
    case Kind::Add:
        if (is_const(a, 0.0)) return b;
        if (is_const(b, 0.0)) return a;
        if (const_a && const_b) return Node::constant(a->value + b->value);
        break;
    case Kind::Sub:
        if (is_const(b, 0.0)) return a;
        if (const_a && const_b) return Node::constant(a->value - b->value);
        break;
    case Kind::Mul:
        if (is_const(a, 0.0) || is_const(b, 0.0)) return Node::constant(0.0);
        if (is_const(a, 1.0)) return b;
        if (is_const(b, 1.0)) return a;
        if (const_a && const_b) return Node::constant(a->value * b->value);
        break;
    case Kind::Div:
        if (is_const(a, 0.0)) return Node::constant(0.0);
        if (is_const(b, 1.0)) return a;
        if (const_a && const_b && b->value != 0.0) return Node::constant(a->value / b->value);
        break;
    case Kind::Pow:
        if (is_const(b, 0.0)) return Node::constant(1.0);
        if (is_const(b, 1.0)) return a;
        if (const_a && const_b) return Node::constant(std::pow(a->value, b->value));
        break;
    case Kind::Neg:
        if (const_a) return Node::constant(-a->value);
        break;
    default:
        break;
    }
    return Node::make(kind, std::move(a), std::move(b), std::move(c), std::move(d));
}

// ---------------------------------------------------------------------------
// Tokenizer / recursive-descent parser
// ---------------------------------------------------------------------------

struct Parser {
    const std::string& text;
    std::size_t pos = 0;

    explicit Parser(const std::string& t) : text(t) {}

    [[noreturn]] void fail(const std::string& what) const {
        std::ostringstream os;
        os << "expression parse error at position " << pos << ": " << what << " in \"" << text
           << "\"";
        throw PreconditionError(os.str());
    }

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    bool eat(char ch) {
        skip_ws();
        if (pos < text.size() && text[pos] == ch) {
            ++pos;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }

    NodePtr parse_expression() {
        NodePtr lhs = parse_term();
        while (true) {
            if (eat('+')) {
                lhs = simplify(Kind::Add, lhs, parse_term());
            } else if (eat('-')) {
                lhs = simplify(Kind::Sub, lhs, parse_term());
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        while (true) {
            if (eat('*')) {
                lhs = simplify(Kind::Mul, lhs, parse_unary());
            } else if (eat('/')) {
                lhs = simplify(Kind::Div, lhs, parse_unary());
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_unary() {
        if (eat('-')) return simplify(Kind::Neg, parse_unary());
        if (eat('+')) return parse_unary();
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        if (eat('^')) {
            // right-associative; exponent may carry its own unary sign
            return simplify(Kind::Pow, base, parse_unary());
        }
        return base;
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos >= text.size()) fail("unexpected end of input");
        const char ch = text[pos];
        if (ch == '(') {
            ++pos;
            NodePtr inner = parse_expression();
            if (!eat(')')) fail("expected ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') return parse_ident();
        fail(std::string("unexpected character '") + ch + "'");
    }

    NodePtr parse_number() {
        std::size_t end = pos;
        while (end < text.size() &&
               (std::isdigit(static_cast<unsigned char>(text[end])) || text[end] == '.' ||
                text[end] == 'e' || text[end] == 'E' ||
                ((text[end] == '+' || text[end] == '-') && end > pos &&
                 (text[end - 1] == 'e' || text[end - 1] == 'E')))) {
            ++end;
        }
        const std::string num = text.substr(pos, end - pos);
        try {
            const double v = std::stod(num);
            pos = end;
            return Node::constant(v);
        } catch (const std::exception&) {
            fail("malformed number '" + num + "'");
        }
    }

    NodePtr parse_ident() {
        std::size_t end = pos;
        while (end < text.size() && (std::isalnum(static_cast<unsigned char>(text[end])) ||
                                     text[end] == '_')) {
            ++end;
        }
        const std::string name = text.substr(pos, end - pos);
        pos = end;

        if (name == "exp" || name == "log" || name == "min" || name == "max") {
            if (!eat('(')) fail("expected '(' after " + name);
            NodePtr first = parse_expression();
            if (name == "exp" || name == "log") {
                if (!eat(')')) fail("expected ')'");
                return simplify(name == "exp" ? Kind::Exp : Kind::Log, first);
            }
            if (!eat(',')) fail("expected ',' in " + name + "(a, b)");
            NodePtr second = parse_expression();
            if (!eat(')')) fail("expected ')'");
            return Node::make(name == "min" ? Kind::Min : Kind::Max, first, second);
        }

        if (name == "t" || name == "m" || name == "y" || name == "n" || name == "z" ||
            name == "u") {
            return Node::variable(name);
        }
        if (name.size() >= 2 && name[0] == 'x') {
            for (std::size_t i = 1; i < name.size(); ++i)
                if (!std::isdigit(static_cast<unsigned char>(name[i])))
                    fail("unknown identifier '" + name + "'");
            if (name.substr(1) == "0") fail("state variables are x1..xN");
            return Node::variable(name);
        }
        fail("unknown identifier '" + name + "'");
    }
};

double eval_node(const Node& node, const CoeffArgs& a, bool m_is_phi) {
    switch (node.kind) {
    case Kind::Constant: return node.value;
    case Kind::Variable: {
        if (node.var == "t") return a.t;
        if (node.var == "m") return m_is_phi ? a.m_phi : (a.m.empty() ? 0.0 : a.m[0]);
        if (node.var == "y") return a.y;
        if (node.var == "n") return a.y_mean;
        if (node.var == "z") return a.z;
        if (node.var == "u") return a.u;
        const std::size_t idx = std::stoul(node.var.substr(1)) - 1;
        return idx < a.x.size() ? a.x[idx] : 0.0;
    }
    case Kind::Add: return eval_node(*node.a, a, m_is_phi) + eval_node(*node.b, a, m_is_phi);
    case Kind::Sub: return eval_node(*node.a, a, m_is_phi) - eval_node(*node.b, a, m_is_phi);
    case Kind::Mul: return eval_node(*node.a, a, m_is_phi) * eval_node(*node.b, a, m_is_phi);
    case Kind::Div: return eval_node(*node.a, a, m_is_phi) / eval_node(*node.b, a, m_is_phi);
    case Kind::Pow:
        return std::pow(eval_node(*node.a, a, m_is_phi), eval_node(*node.b, a, m_is_phi));
    case Kind::Neg: return -eval_node(*node.a, a, m_is_phi);
    case Kind::Exp: return std::exp(eval_node(*node.a, a, m_is_phi));
    case Kind::Log: return std::log(eval_node(*node.a, a, m_is_phi));
    case Kind::Min:
        return std::min(eval_node(*node.a, a, m_is_phi), eval_node(*node.b, a, m_is_phi));
    case Kind::Max:
        return std::max(eval_node(*node.a, a, m_is_phi), eval_node(*node.b, a, m_is_phi));
    case Kind::SelectLE:
        return eval_node(*node.a, a, m_is_phi) <= eval_node(*node.b, a, m_is_phi)
                   ? eval_node(*node.c, a, m_is_phi)
                   : eval_node(*node.d, a, m_is_phi);
    }
    return 0.0;
}

std::string var_name_for(const DerivKey& key, bool m_is_phi) {
    using Tag = DerivKey::Tag;
    switch (key.tag) {
    case Tag::X: return "x" + std::to_string(key.index + 1);
    case Tag::M: return (!m_is_phi && key.index == 0) ? "m" : "";
    case Tag::MPhi: return m_is_phi ? "m" : "";
    case Tag::Y: return "y";
    case Tag::N: return "n";
    case Tag::Z: return "z";
    case Tag::K: return ""; // grammar carries no jump-loading variable
    case Tag::U: return "u";
    }
    return "";
}

NodePtr diff_node(const NodePtr& node, const std::string& var) {
    switch (node->kind) {
    case Kind::Constant: return Node::constant(0.0);
    case Kind::Variable: return Node::constant(node->var == var ? 1.0 : 0.0);
    case Kind::Add: return simplify(Kind::Add, diff_node(node->a, var), diff_node(node->b, var));
    case Kind::Sub: return simplify(Kind::Sub, diff_node(node->a, var), diff_node(node->b, var));
    case Kind::Mul:
        return simplify(Kind::Add, simplify(Kind::Mul, diff_node(node->a, var), node->b),
                        simplify(Kind::Mul, node->a, diff_node(node->b, var)));
    case Kind::Div:
        // (a' b - a b') / b^2
        return simplify(
            Kind::Div,
            simplify(Kind::Sub, simplify(Kind::Mul, diff_node(node->a, var), node->b),
                     simplify(Kind::Mul, node->a, diff_node(node->b, var))),
            simplify(Kind::Mul, node->b, node->b));
    case Kind::Pow: {
        const NodePtr da = diff_node(node->a, var);
        const NodePtr db = diff_node(node->b, var);
        if (node->b->kind == Kind::Constant) {
            // c a^{c-1} a'
            return simplify(
                Kind::Mul,
                simplify(Kind::Mul, Node::constant(node->b->value),
                         simplify(Kind::Pow, node->a, Node::constant(node->b->value - 1.0))),
                da);
        }
        // a^b (b' log a + b a' / a)
        const NodePtr inner =
            simplify(Kind::Add, simplify(Kind::Mul, db, simplify(Kind::Log, node->a)),
                     simplify(Kind::Div, simplify(Kind::Mul, node->b, da), node->a));
        return simplify(Kind::Mul, Node::make(Kind::Pow, node->a, node->b), inner);
    }
    case Kind::Neg: return simplify(Kind::Neg, diff_node(node->a, var));
    case Kind::Exp:
        return simplify(Kind::Mul, Node::make(Kind::Exp, node->a), diff_node(node->a, var));
    case Kind::Log: return simplify(Kind::Div, diff_node(node->a, var), node->a);
    case Kind::Min:
        return Node::make(Kind::SelectLE, node->a, node->b, diff_node(node->a, var),
                          diff_node(node->b, var));
    case Kind::Max:
        return Node::make(Kind::SelectLE, node->a, node->b, diff_node(node->b, var),
                          diff_node(node->a, var));
    case Kind::SelectLE:
        return Node::make(Kind::SelectLE, node->a, node->b, diff_node(node->c, var),
                          diff_node(node->d, var));
    }
    return Node::constant(0.0);
}

void print_node(const Node& node, std::ostream& os) {
    switch (node.kind) {
    case Kind::Constant: os << node.value; return;
    case Kind::Variable: os << node.var; return;
    case Kind::Add: os << '(';
        print_node(*node.a, os);
        os << " + ";
        print_node(*node.b, os);
        os << ')';
        return;
    case Kind::Sub: os << '(';
        print_node(*node.a, os);
        os << " - ";
        print_node(*node.b, os);
        os << ')';
        return;
    case Kind::Mul: os << '(';
        print_node(*node.a, os);
        os << " * ";
        print_node(*node.b, os);
        os << ')';
        return;
    case Kind::Div: os << '(';
        print_node(*node.a, os);
        os << " / ";
        print_node(*node.b, os);
        os << ')';
        return;
    case Kind::Pow: os << '(';
        print_node(*node.a, os);
        os << " ^ ";
        print_node(*node.b, os);
        os << ')';
        return;
    case Kind::Neg: os << "(-";
        print_node(*node.a, os);
        os << ')';
        return;
    case Kind::Exp: os << "exp(";
        print_node(*node.a, os);
        os << ')';
        return;
    case Kind::Log: os << "log(";
        print_node(*node.a, os);
        os << ')';
        return;
    case Kind::Min: os << "min(";
        print_node(*node.a, os);
        os << ", ";
        print_node(*node.b, os);
        os << ')';
        return;
    case Kind::Max: os << "max(";
        print_node(*node.a, os);
        os << ", ";
        print_node(*node.b, os);
        os << ')';
        return;
    case Kind::SelectLE: os << "select_le(";
        print_node(*node.a, os);
        os << ", ";
        print_node(*node.b, os);
        os << ", ";
        print_node(*node.c, os);
        os << ", ";
        print_node(*node.d, os);
        os << ')';
        return;
    }
}

void collect_vars(const Node& node, std::set<std::string>& out) {
    if (node.kind == Kind::Variable) out.insert(node.var);
    for (const auto& child : {node.a, node.b, node.c, node.d})
        if (child) collect_vars(*child, out);
}

} // namespace

Expression Expression::parse(const std::string& text) {
    Parser parser(text);
    NodePtr root = parser.parse_expression();
    parser.skip_ws();
    if (parser.pos != text.size()) parser.fail("trailing characters");
    return Expression(std::move(root));
}

double Expression::eval(const CoeffArgs& args, bool m_is_phi_channel) const {
    if (!root_) return 0.0;
    return eval_node(*root_, args, m_is_phi_channel);
}

Expression Expression::derivative(const DerivKey& key, bool m_is_phi_channel) const {
    if (!root_) return Expression(Node::constant(0.0));
    const std::string var = var_name_for(key, m_is_phi_channel);
    if (var.empty()) return Expression(Node::constant(0.0));
    return Expression(diff_node(root_, var));
}

bool Expression::is_zero() const {
    return !root_ || (root_->kind == Kind::Constant && root_->value == 0.0);
}

std::string Expression::to_string() const {
    if (!root_) return "0";
    std::ostringstream os;
    print_node(*root_, os);
    return os.str();
}

std::size_t Expression::max_x_index() const {
    std::size_t max_idx = 0;
    for (const auto& name : variables()) {
        if (name.size() >= 2 && name[0] == 'x')
            max_idx = std::max(max_idx, static_cast<std::size_t>(std::stoul(name.substr(1))));
    }
    return max_idx;
}

std::set<std::string> Expression::variables() const {
    std::set<std::string> out;
    if (root_) collect_vars(*root_, out);
    return out;
}

namespace {

const std::vector<DerivKey>& candidate_keys(std::size_t max_x) {
    static thread_local std::vector<DerivKey> keys;
    keys.clear();
    for (std::size_t i = 0; i < max_x; ++i) keys.push_back(DerivKey::x(i));
    keys.push_back(DerivKey::m(0));
    keys.push_back(DerivKey::m_phi());
    keys.push_back(DerivKey::y());
    keys.push_back(DerivKey::n());
    keys.push_back(DerivKey::z());
    keys.push_back(DerivKey::u());
    return keys;
}

} // namespace

CoefficientFn coefficient_from_expression(const Expression& expr, bool m_is_phi_channel) {
    CoefficientFn fn;
    fn.value = [expr, m_is_phi_channel](const CoeffArgs& a) {
        return expr.eval(a, m_is_phi_channel);
    };
    for (const DerivKey& key : candidate_keys(expr.max_x_index())) {
        const Expression d = expr.derivative(key, m_is_phi_channel);
        if (d.is_zero()) continue;
        fn.partials[key] = [d, m_is_phi_channel](const CoeffArgs& a) {
            return d.eval(a, m_is_phi_channel);
        };
    }
    return fn;
}

JumpCoefficientFn jump_coefficient_from_expression(const Expression& expr,
                                                   bool m_is_phi_channel) {
    JumpCoefficientFn fn;
    fn.value = [expr, m_is_phi_channel](const CoeffArgs& a, double) {
        return expr.eval(a, m_is_phi_channel);
    };
    for (const DerivKey& key : candidate_keys(expr.max_x_index())) {
        const Expression d = expr.derivative(key, m_is_phi_channel);
        if (d.is_zero()) continue;
        fn.partials[key] = [d, m_is_phi_channel](const CoeffArgs& a, double) {
            return d.eval(a, m_is_phi_channel);
        };
    }
    return fn;
}

UtilityFn utility_from_expression(const Expression& expr) {
    UtilityFn fn;
    const Expression d = expr.derivative(DerivKey::y(), false);
    fn.value = [expr](double y) {
        CoeffArgs a;
        a.y = y;
        return expr.eval(a, false);
    };
    fn.deriv = [d](double y) {
        CoeffArgs a;
        a.y = y;
        return d.eval(a, false);
    };
    return fn;
}

} // namespace mfdelay
