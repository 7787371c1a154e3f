import { AnnotatorApp } from "./app.js";

const app = new AnnotatorApp(document);
app.init();
