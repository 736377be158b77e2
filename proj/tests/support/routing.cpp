#include "routing.hpp"

#include "recrefine/context.hpp"
#include "recrefine/replies.hpp"

namespace recrefine::testing {

BuildStats expected_stats(const std::vector<RoutingCase>& cases) {
  BuildStats s;
  for (const auto& c : cases) {
    ++s.n_input;
    if (c.garbled) {
      ++s.n_parse_errors;
    } else if (c.pred_correct && c.reasonable) {
      ++s.n_reason;
      ++s.n_reflect_pos;
    } else if (!c.pred_correct && !c.reasonable) {
      if (c.refine_success) {
        ++s.n_refine;
        ++s.n_reflect_neg;
      } else {
        ++s.n_discarded_failed_refine;
      }
    } else {
      ++s.n_discarded_mixed;
    }
  }
  return s;
}

std::vector<RoutingCase> all_routing_cases() {
  std::vector<RoutingCase> out;
  for (bool p : {true, false}) {
    for (bool r : {true, false}) {
      for (bool s : {true, false}) out.push_back({p, r, s, false});
    }
  }
  return out;
}

namespace {

void script(ScriptedBackend& b, TemplateId reason, TemplateId reflect, TemplateId refine, const SlotMap& slots,
            int label, const RoutingCase& c, const std::string& tag) {
  const std::string knowledge = "knowledge " + tag;
  if (c.garbled) {
    b.add(reason, slots, "no markers here");
    return;
  }
  const int pred = c.pred_correct ? label : 1 - label;
  b.add(reason, slots, format_reason({knowledge, pred}));
  SlotMap judge = slots;
  judge["knowledge"] = knowledge;
  const std::string reflection = "reflection " + tag;
  b.add(reflect, judge, c.reasonable ? reflect_target(Verdict::reasonable, "")
                                     : reflect_target(Verdict::unreasonable, reflection));
  SlotMap fix = judge;
  fix["reflection"] = reflection;
  b.add(refine, fix, format_refine({"refined " + tag, c.refine_success ? label : 1 - label}));
}

}  // namespace

UserRoutingFixture make_user_routing(const std::vector<RoutingCase>& cases, const TemplateSet&) {
  UserRoutingFixture f;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const std::string tag = std::to_string(k);
    f.catalog["h" + tag] = ItemMeta{"h" + tag, "History item " + tag, {}};
    f.catalog["t" + tag] = ItemMeta{"t" + tag, "Target item " + tag, {}};
    LabeledSample s{{{"h" + tag, 4}}, "t" + tag, static_cast<int>(k % 2)};
    script(f.backend, TemplateId::user_reason, TemplateId::user_reflect, TemplateId::user_refine,
           user_construction_slots(s, f.catalog), s.label, cases[k], tag);
    f.samples.push_back(std::move(s));
  }
  return f;
}

ItemRoutingFixture make_item_routing(const std::vector<RoutingCase>& cases, const TemplateSet&) {
  ItemRoutingFixture f;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const std::string tag = std::to_string(k);
    f.catalog["i" + tag] = ItemMeta{"i" + tag, "Item " + tag, {{"genres", "Drama"}}};
    ItemCentricSample s{"i" + tag, {{{"p" + tag, 5}}}, {{{"n" + tag, 1}}}, {{"t" + tag, 4}}, static_cast<int>(k % 2)};
    script(f.backend, TemplateId::item_reason, TemplateId::item_reflect, TemplateId::item_refine,
           item_construction_slots(s, f.catalog), s.label, cases[k], tag);
    f.samples.push_back(std::move(s));
  }
  return f;
}

}  // namespace recrefine::testing
