import { ApiClient, Cohort } from "./api.js";
import { SessionController } from "./session.js";
import { mount } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const cohort = (params.get("cohort") ?? "medical_officer") as Cohort;
const seed = Number(params.get("seed") ?? Date.now() % 1_000_000);

const api = new ApiClient("");
const controller = new SessionController(api, cohort, seed);
const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");
mount(root, controller, api);
void controller.start();
