import { TrialApi } from "./api.js";
import { ConductApp } from "./app.js";

const base = (window as unknown as { COMBODOSE_API?: string }).COMBODOSE_API ?? "";
const root = document.getElementById("app");
if (root) {
  new ConductApp(root, new TrialApi(base)).boot().catch((err) => {
    root.textContent = `failed to reach the trial service: ${err}`;
  });
}
