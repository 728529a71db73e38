#include "uqgfn/gfn/trainer.hpp"

#include "uqgfn/common/io.hpp"

namespace uqgfn::gfn {

std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::kTrajectoryBalance: return "tb";
    case LossKind::kSubTrajectoryBalance: return "subtb";
    case LossKind::kDetailedBalance: return "db";
  }
  return "tb";
}

LossKind loss_kind_from_string(std::string_view name) {
  if (name == "tb") return LossKind::kTrajectoryBalance;
  if (name == "subtb") return LossKind::kSubTrajectoryBalance;
  if (name == "db") return LossKind::kDetailedBalance;
  throw UsageError("unknown loss '" + std::string(name) + "' (expected tb, subtb or db)");
}

void write_loss_curve(const std::filesystem::path& path, const std::vector<double>& losses) {
  io::CsvTable table{{"episode", "loss"}, {}};
  table.rows.reserve(losses.size());
  for (std::size_t k = 0; k < losses.size(); ++k) table.rows.push_back({std::to_string(k), io::format_double(losses[k])});
  io::write_csv(path, table);
}

}  // namespace uqgfn::gfn
