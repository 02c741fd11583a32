import { createApp } from "./app";
import "./style.css";

createApp(document.getElementById("app")!, window.localStorage);
