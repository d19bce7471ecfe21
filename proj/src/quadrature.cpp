#include "gridfem/quadrature.h"

namespace gridfem {

namespace {

void add_sym3(TriangleRule& rule, double a, double b, double w) {
    // orbit of (a, b, b); a + 2b = 1
    rule.points.push_back({a, b, b, w});
    rule.points.push_back({b, a, b, w});
    rule.points.push_back({b, b, a, w});
}

void add_sym6(TriangleRule& rule, double a, double b, double c, double w) {
    rule.points.push_back({a, b, c, w});
    rule.points.push_back({a, c, b, w});
    rule.points.push_back({b, a, c, w});
    rule.points.push_back({b, c, a, w});
    rule.points.push_back({c, a, b, w});
    rule.points.push_back({c, b, a, w});
}

TriangleRule make_degree4() {
    TriangleRule rule;
    rule.degree = 4;
    add_sym3(rule, 0.108103018168070, 0.445948490915965, 0.223381589678011);
    add_sym3(rule, 0.816847572980459, 0.091576213509771, 0.109951743655322);
    return rule;
}

TriangleRule make_degree6() {
    TriangleRule rule;
    rule.degree = 6;
    add_sym3(rule, 0.501426509658179, 0.249286745170910, 0.116786275726379);
    add_sym3(rule, 0.873821971016996, 0.063089014491502, 0.050844906370207);
    add_sym6(rule, 0.053145049844817, 0.310352451033784, 0.636502499121399, 0.082851075618374);
    return rule;
}

} // namespace

const TriangleRule& triangle_rule_degree4() {
    static const TriangleRule rule = make_degree4();
    return rule;
}

const TriangleRule& triangle_rule_degree6() {
    static const TriangleRule rule = make_degree6();
    return rule;
}

} // namespace gridfem
